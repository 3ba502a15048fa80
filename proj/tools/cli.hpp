#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "mcbound/annealing.hpp"
#include "mcbound/ar_model.hpp"
#include "mcbound/bounds.hpp"
#include "mcbound/coupling.hpp"

namespace mcbound::cli {

using nlohmann::json;

/// Exit statuses.
inline constexpr int kExitOk = 0;
inline constexpr int kExitCheckFailed = 1;
inline constexpr int kExitBadInput = 2;

struct RunConfig {
  std::string subcommand;
  std::string config_path;
  /// Parsed --config document (an empty object when no file was given).
  json document = json::object();
  std::optional<std::uint64_t> seed;
  /// Output directory; empty writes artifacts to the output stream.
  std::string out_dir;
  std::optional<std::size_t> replicas;
  std::optional<std::size_t> horizon;
  bool clamp = false;
  unsigned threads = 0;
};

const std::vector<std::string>& subcommands();

/// Reads and parses a JSON document; throws InvalidInput on I/O or syntax errors.
json read_document(const std::string& path);

/// FNV-1a 64 of the canonical dump of the document with the subcommand,
/// seed and numeric overrides, as 16 hex digits.
std::string config_hash(const RunConfig& cfg);

// Typed inputs. Each rejects unknown keys and checks ranges at parse time.

struct BoundRequest {
  bounds::HomogeneousBoundInput input{};
  std::size_t n_first = 1;
  std::size_t n_last = 1;
};
BoundRequest parse_bound(const json& doc);

struct BoundInhomRequest {
  bounds::InhomogeneousSchedule schedule;
  std::size_t n_last = 1;
};
BoundInhomRequest parse_bound_inhom(const json& doc);

struct RateRequest {
  double epsilon = 0.0;
  double lambda = 0.0;
  double M = 0.0;
};
RateRequest parse_rate(const json& doc);

struct CoupleRequest {
  coupling::CouplingConfig config;
  Measure xi;
  Measure xi_prime;
  std::size_t horizon = 20;
  std::size_t replicas = 10000;
};
CoupleRequest parse_couple(const json& doc);

struct IdentityRequest {
  coupling::CouplingConfig config;
  Measure xi;
  Measure xi_prime;
  std::size_t n = 3;
};
IdentityRequest parse_identity(const json& doc);

struct ARRequest {
  ar::ARModel model;
  ar::ARRunConfig run;
  double cross_moment = 1.0;
};
ARRequest parse_ar(const json& doc);

struct AnnealRequest {
  anneal::Objective objective;
  anneal::Proposal proposal;
  double beta = 0.75;
  anneal::AnnealConfig config;
};
AnnealRequest parse_anneal(const json& doc);

struct PiShiftRequest {
  anneal::Objective objective;
  std::vector<double> gammas;
};
PiShiftRequest parse_pi_shift(const json& doc);

/// Runs the subcommand; artifacts go to cfg.out_dir (written atomically) or to `out`.
/// Error and failure reports go to `err` as JSON.
int execute(const RunConfig& cfg, std::ostream& out, std::ostream& err);

/// Command-line entry point.
int run(int argc, char** argv, std::ostream& out, std::ostream& err);

}  // namespace mcbound::cli
