#pragma once

#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "adpmpc/adp.hpp"
#include "adpmpc/augmentation.hpp"
#include "adpmpc/controller.hpp"
#include "adpmpc/fixedpoint.hpp"
#include "adpmpc/perunit.hpp"
#include "adpmpc/simloop.hpp"

namespace adpmpc {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct FingerprintMismatch : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class ControllerKind { Adp, Dmpc };
enum class NumericProfile { Float, Fixed };

/// State-relevance measure used by the tail-cost SDP.
struct MeasureConfig {
  std::string kind = "isotropic";  // "orbit" or "isotropic"
  double spread = 0.001;           // orbit: added isotropic variance; isotropic: the variance
  double u_prev_variance = 2.0 / 3.0;
};

/// Everything a run depends on. Every field has a key in the text format and
/// write_config emits all of them.
struct RunConfig {
  std::string name = "default";
  ControllerKind controller = ControllerKind::Adp;
  NumericProfile profile = NumericProfile::Float;
  int horizon = 1;
  double lambda_u = 0.00235;
  bool parallel = false;

  PerUnitParams params;
  ControllerTuning tuning;
  ReferenceLimits limits;
  Scenario scenario;

  int bellman_iterations = 50;
  int ci_bellman_iterations = 5;
  MeasureConfig measure;
  double solver_tolerance = 1e-8;
  std::uint64_t seed = 1;

  void validate() const;
};

/// Names accepted by preset(): table2-n1, table2-n2, dmpc-n1, dmpc-n2,
/// fig6-steps.
std::vector<std::string> preset_names();
RunConfig preset(const std::string& name);

/// Parses `key = value` lines; '#' starts a comment. A `preset` key, if
/// present, must come first and seeds the defaults. `step = <t> <T*>` may
/// repeat. Unknown keys and malformed values throw ConfigError.
RunConfig parse_config(std::istream& is);
RunConfig load_config(const std::string& path);
void write_config(const RunConfig& cfg, std::ostream& os);

/// 64-bit FNV-1a.
std::uint64_t fnv1a(const std::string& data);
std::string hex64(std::uint64_t v);

/// Hash of the canonical text of the whole configuration.
std::uint64_t config_fingerprint(const RunConfig& cfg);

/// Hash of the quantities a trained tail cost depends on: the machine and
/// inverter model, Ts, gamma, delta, f*, r1, r2 and the state-relevance
/// measure. The Bellman depth is stored next to it in the artifact.
std::uint64_t tail_fingerprint(const RunConfig& cfg);

BellmanSdp bellman_sdp_for(const RunConfig& cfg, bool ci);

struct TailArtifact {
  QuadValueFunction tail;
  std::uint64_t fingerprint = 0;
  int bellman_iterations = 0;
  double objective = 0.0;
  std::string status;
};

/// Plain text: header lines, then P row-major, q and r, all at %.17g.
void write_tail(const TailArtifact& artifact, const RunConfig& cfg, std::ostream& os);
TailArtifact read_tail(std::istream& is);
TailArtifact load_tail(const std::string& path);

/// Throws FingerprintMismatch unless the artifact was trained for `cfg`.
void check_tail(const TailArtifact& artifact, const RunConfig& cfg);

}  // namespace adpmpc
