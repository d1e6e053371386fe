#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sstream>

#include "adpmpc/config.hpp"
#include "test_util.hpp"

using namespace adpmpc;

namespace {

RunConfig parse(const std::string& text) {
  std::istringstream is(text);
  return parse_config(is);
}

std::string text_of(const RunConfig& c) {
  std::ostringstream os;
  write_config(c, os);
  return os.str();
}

TailArtifact sample_artifact(const RunConfig& c) {
  testutil::Rng rng(61);
  TailArtifact a;
  const Eigen::MatrixXd m = rng.matrix(12, 12);
  a.tail.P = m * m.transpose();
  a.tail.P.row(layout::kConst).setZero();
  a.tail.P.col(layout::kConst).setZero();
  a.tail.q = rng.vector(12);
  a.tail.r = 0.125;
  a.fingerprint = tail_fingerprint(c);
  a.bellman_iterations = 7;
  a.objective = 0.3;
  a.status = "optimal";
  return a;
}

}  // namespace

TEST_CASE("FNV-1a reference values") {
  CHECK(fnv1a("") == 0xcbf29ce484222325ULL);
  CHECK(fnv1a("a") == 0xaf63dc4c8601ec8cULL);
  CHECK(fnv1a("foobar") == 0x85944171f73967e8ULL);
  CHECK(hex64(0xabcULL) == "0000000000000abc");
}

TEST_CASE("config text round trip") {
  for (const auto& name : preset_names()) {
    const RunConfig c = preset(name);
    CHECK_NOTHROW(c.validate());
    const std::string t = text_of(c);
    const RunConfig back = parse(t);
    CHECK(text_of(back) == t);
    CHECK(config_fingerprint(back) == config_fingerprint(c));
  }
}

TEST_CASE("parsing") {
  const RunConfig c = parse(
      "# comment line\n"
      "preset = table2-n2\n"
      "  lambda_u = 0.5   # trailing comment\n"
      "controller = dmpc\n"
      "omega_r = 0.99\n"
      "step = 0.01 0.5\n"
      "step = 0.02 -0.5\n"
      "parallel = true\n");
  CHECK(c.horizon == 2);
  CHECK(c.controller == ControllerKind::Dmpc);
  CHECK(c.lambda_u == 0.5);
  CHECK(c.params.omega_r == 0.99);
  CHECK(c.parallel);
  REQUIRE(c.scenario.steps.size() == 2);
  CHECK(c.scenario.steps[1].time == 0.02);
  CHECK(c.scenario.steps[1].t_star == -0.5);

  // Steps given in a file replace those of the preset.
  const RunConfig f = parse("preset = fig6-steps\nstep = 0.01 0.0\n");
  REQUIRE(f.scenario.steps.size() == 1);
  CHECK(f.scenario.steps[0].time == 0.01);
  CHECK(parse("preset = fig6-steps\nsteps = none\n").scenario.steps.empty());
}

TEST_CASE("parse errors") {
  CHECK_THROWS_AS(parse("bogus = 1\n"), ConfigError);
  CHECK_THROWS_AS(parse("horizon = two\n"), ConfigError);
  CHECK_THROWS_AS(parse("horizon = 2x\n"), ConfigError);
  CHECK_THROWS_AS(parse("delta 4\n"), ConfigError);
  CHECK_THROWS_AS(parse("delta = 4\npreset = table2-n1\n"), ConfigError);
  CHECK_THROWS_AS(parse("preset = nope\n"), ConfigError);
  CHECK_THROWS_AS(parse("controller = pid\n"), ConfigError);
  CHECK_THROWS_AS(parse("measure = gaussian\n"), ConfigError);
  CHECK_THROWS_AS(parse("step = 0.01\n"), ConfigError);
  CHECK_THROWS_AS(parse("parallel = maybe\n"), ConfigError);
  CHECK_THROWS_AS(parse("horizon = 4\n"), ConfigError);
  CHECK_THROWS_AS(parse("gamma = 1.0\n"), ConfigError);
  CHECK_THROWS_AS(parse("controller = dmpc\nprofile = fixed\n"), ConfigError);
  CHECK_THROWS_AS(parse("step = 0.01 2.0\n"), ConfigError);
  CHECK_THROWS_AS(load_config("/nonexistent/config.txt"), ConfigError);
}

TEST_CASE("fingerprints") {
  const RunConfig a = preset("table2-n1");
  RunConfig b = a;
  CHECK(config_fingerprint(a) == config_fingerprint(b));
  b.scenario.periods = 30;
  CHECK(config_fingerprint(a) != config_fingerprint(b));
  // Scenario and horizon do not change the tail; model and tuning do.
  CHECK(tail_fingerprint(a) == tail_fingerprint(b));
  b.horizon = 2;
  b.lambda_u = 1.0;
  CHECK(tail_fingerprint(a) == tail_fingerprint(b));
  b.tuning.delta += 1e-12;
  CHECK(tail_fingerprint(a) != tail_fingerprint(b));
  b = a;
  b.params.omega_r = 1.0;
  CHECK(tail_fingerprint(a) != tail_fingerprint(b));
  b = a;
  b.measure.spread *= 2.0;
  CHECK(tail_fingerprint(a) != tail_fingerprint(b));
  b = a;
  b.measure.kind = b.measure.kind == "orbit" ? "isotropic" : "orbit";
  CHECK(tail_fingerprint(a) != tail_fingerprint(b));
}

TEST_CASE("tail artifact round trip and checks") {
  const RunConfig c = preset("table2-n1");
  const TailArtifact a = sample_artifact(c);
  std::ostringstream os;
  write_tail(a, c, os);
  std::istringstream is(os.str());
  const TailArtifact b = read_tail(is);
  CHECK(b.tail.P == a.tail.P);
  CHECK(b.tail.q == a.tail.q);
  CHECK(b.tail.r == a.tail.r);
  CHECK(b.fingerprint == a.fingerprint);
  CHECK(b.bellman_iterations == 7);
  CHECK(b.status == "optimal");
  CHECK_NOTHROW(check_tail(b, c));

  RunConfig other = c;
  other.tuning.gamma = 0.9;
  CHECK_THROWS_AS(check_tail(b, other), FingerprintMismatch);

  // Corrupted artifacts.
  std::string txt = os.str();
  std::istringstream truncated(txt.substr(0, txt.size() / 2));
  CHECK_THROWS_AS(read_tail(truncated), ConfigError);
  TailArtifact asym = a;
  asym.tail.P(0, 1) += 1.0;
  std::ostringstream os2;
  write_tail(asym, c, os2);
  std::istringstream is2(os2.str());
  CHECK_THROWS_AS(read_tail(is2), ConfigError);
  CHECK_THROWS_AS(load_tail("/nonexistent/tail.txt"), ConfigError);
}

TEST_CASE("measure selection") {
  RunConfig c = preset("table2-n1");
  const BellmanSdp full = bellman_sdp_for(c, false), ci = bellman_sdp_for(c, true);
  CHECK(full.iterations == c.bellman_iterations);
  CHECK(ci.iterations == c.ci_bellman_iterations);
  c.measure.kind = "isotropic";
  c.measure.spread = 0.25;
  const BellmanSdp iso = bellman_sdp_for(c, false);
  CHECK(iso.moments.sigma(0, 0) == 0.25);
  CHECK(iso.moments.sigma(0, 1) == 0.0);
}
