#include "wbc/exp/comparison.hpp"
#include "wbc/exp/config_file.hpp"
#include "wbc/exp/fast_rate.hpp"
#include "wbc/exp/policy_map.hpp"
#include "wbc/exp/probes.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace wbc;
using namespace wbc::exp;

namespace {

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

std::vector<std::string> split(const std::string& line, char sep = ',') {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string tok;
  while (std::getline(ss, tok, sep)) out.push_back(tok);
  return out;
}

ExperimentSpec small_spec(const std::filesystem::path& dir) {
  ExperimentSpec spec;
  spec.methods = {train::Method::wbc, train::Method::independent};
  spec.env.episode_length = 10;
  spec.train.iterations = 3;
  spec.train.batch_episodes = 1;
  spec.train.atoms_per_agent = 8;
  spec.map_resolution = 6;
  spec.output_dir = dir;
  return spec;
}

}  // namespace

TEST_SUITE("config") {
  TEST_CASE("an empty file yields the defaults") {
    const auto spec = parse_config_text("# nothing here\n\n");
    CHECK(spec.train.lambda0 == 0.5);
    CHECK(spec.train.epsilon0 == 0.1);
    CHECK(spec.train.beta == 0.8);
    CHECK(spec.env.n_agents == 3);
    CHECK(spec.methods.size() == 4);
    CHECK(spec.seeds == std::vector<Seed>{0, 1, 2, 3, 4});
    CHECK_FALSE(spec.sweep.has_value());
  }

  TEST_CASE("values, comments and last-one-wins") {
    const auto spec = parse_config_text(
        "lambda0 = 0.25  # weaker\nmethods = wbc, kl_reg\nseeds = 7,8\nlambda0=0.3\nschedule = anneal\n"
        "sweep = true\nsweep_m = 10, 20\n");
    CHECK(spec.train.lambda0 == 0.3);
    CHECK(spec.methods == std::vector<train::Method>{train::Method::wbc, train::Method::kl_reg});
    CHECK(spec.seeds == std::vector<Seed>{7, 8});
    CHECK(spec.train.schedule == train::ScheduleMode::anneal);
    REQUIRE(spec.sweep.has_value());
    CHECK(spec.sweep->m_values == std::vector<int>{10, 20});
  }

  TEST_CASE("range errors name the key and the line") {
    try {
      parse_config_text("beta = 0.8\nlambda0 = -1\n", "run.cfg");
      FAIL("expected a ConfigError");
    } catch (const ConfigError& e) {
      CHECK(e.line() == 2);
      const std::string msg = e.what();
      CHECK(msg.find("run.cfg:2") != std::string::npos);
      CHECK(msg.find("lambda0") != std::string::npos);
    }
  }

  TEST_CASE("unknown keys suggest the nearest one") {
    CHECK(nearest_key("lamda0") == "lambda0");
    CHECK(nearest_key("epsilon") == "epsilon0");
    try {
      parse_config_text("lamda0 = 0.2\n");
      FAIL("expected a ConfigError");
    } catch (const ConfigError& e) {
      CHECK(std::string(e.what()).find("did you mean 'lambda0'") != std::string::npos);
    }
  }

  TEST_CASE("malformed lines and values") {
    CHECK_THROWS_AS(parse_config_text("lambda0 0.2\n"), ConfigError);
    CHECK_THROWS_AS(parse_config_text("lambda0 = abc\n"), ConfigError);
    CHECK_THROWS_AS(parse_config_text("n_agents = 2.5\n"), ConfigError);
    CHECK_THROWS_AS(parse_config_text("methods = wbc, magic\n"), ConfigError);
  }

  TEST_CASE("overrides apply in order and revalidate") {
    ExperimentSpec spec;
    apply_overrides(spec, {"alpha=5", "alpha=7", "p=1"});
    CHECK(spec.train.alpha == 7.0);
    CHECK(spec.train.p == 1);
    CHECK_THROWS(apply_overrides(spec, {"alpha"}));
    CHECK_THROWS(apply_overrides(spec, {"epsilon0=0"}));
  }

  TEST_CASE("every documented key is settable with its default") {
    for (const auto& key : config_keys()) {
      ExperimentSpec spec;
      CAPTURE(key.name);
      CHECK_NOTHROW(set_key(spec, key.name, key.default_value));
      CHECK_FALSE(key.help.empty());
    }
  }
}

TEST_SUITE("probes") {
  TEST_CASE("uniform policies put 0.2 on every action") {
    const env::WorldConfig world;
    const policy::ObsDiscretizer disc;
    const std::vector<policy::SoftmaxPolicy> pols{{disc.n_cells(), 0}, {disc.n_cells(), 1}, {disc.n_cells(), 2}};
    std::ostringstream os;
    write_probe_csv(os, pols, canonical_probes(), world, disc);
    std::istringstream in(os.str());
    std::string line;
    std::getline(in, line);
    CHECK(line == "state,agent,action,probability");
    int rows = 0;
    while (std::getline(in, line)) {
      const auto f = split(line);
      REQUIRE(f.size() == 4);
      CHECK(std::stod(f[3]) == doctest::Approx(0.2));
      ++rows;
    }
    CHECK(rows == 5 * 3 * 5);
    CHECK(max_pairwise_tv(pols, canonical_probes(), world, disc) == 0.0);
    CHECK(shared_modal_count(pols, canonical_probes(), world, disc) == 5);
  }

  TEST_CASE("probe placement") {
    const env::WorldConfig world;
    const policy::ObsDiscretizer disc;
    for (const auto& p : canonical_probes()) CHECK_NOTHROW(validate_probe(p, world));
    const auto right = canonical_probes()[0];
    // Own offset self - target = (-0.3, 0); with three agents the others sit
    // at (0.1,0.9) and (0.9,0.1), and the first is nearer.
    CHECK(probe_cell(right, 0, world, disc) == disc.cell_from_offsets({-0.3, 0.0}, {-0.2, 0.4}));
    env::WorldConfig crowded;
    crowded.n_agents = 6;
    CHECK_THROWS_AS(validate_probe(right, crowded), std::invalid_argument);
  }

  TEST_CASE("TV detects disagreement") {
    const env::WorldConfig world;
    const policy::ObsDiscretizer disc;
    std::vector<policy::SoftmaxPolicy> pols{{disc.n_cells(), 0}, {disc.n_cells(), 1}, {disc.n_cells(), 2}};
    pols[1].logits().row(probe_cell(canonical_probes()[0], 1, world, disc)) << 0, 50, 0, 0, 0;
    CHECK(max_pairwise_tv(pols, canonical_probes(), world, disc) == doctest::Approx(0.8));
    CHECK(shared_modal_count(pols, canonical_probes(), world, disc) == 4);
  }
}

TEST_SUITE("policy map") {
  const env::WorldConfig world;
  const policy::ObsDiscretizer disc;

  TEST_CASE("uniform policy maps to stay everywhere") {
    const policy::SoftmaxPolicy pi(disc.n_cells(), 0);
    const auto map = compute_policy_map(pi, 0, world, disc, 10, map_context(world, 0));
    REQUIRE(map.points.size() == 100);
    CHECK(map.points[1].x() > map.points[0].x());
    CHECK(map.points[1].y() == map.points[0].y());
    for (auto a : map.actions) CHECK(a == ot::Action::stay);
    CHECK(fraction_toward_target(map, world) == 0.0);
    CHECK_THROWS_AS(compute_policy_map(pi, 0, world, disc, 1, map_context(world, 0)), std::invalid_argument);
  }

  TEST_CASE("a policy that always moves right helps exactly left of the target") {
    policy::SoftmaxPolicy pi(disc.n_cells(), 0);
    pi.logits().col(static_cast<int>(ot::Action::right)).array() = 3.0;
    const auto map = compute_policy_map(pi, 0, world, disc, 20, map_context(world, 3));
    int left_of_target = 0;
    for (const auto& p : map.points) left_of_target += p.x() < map.target.x() - 0.5 * world.step_size ? 1 : 0;
    CHECK(fraction_toward_target(map, world) == doctest::Approx(left_of_target / 400.0));

    // Adding a constant per row leaves every argmax unchanged.
    auto shifted = pi;
    std::mt19937_64 rng(1);
    std::normal_distribution<double> n(0.0, 10.0);
    for (Eigen::Index r = 0; r < shifted.logits().rows(); ++r) shifted.logits().row(r).array() += n(rng);
    CHECK(compute_policy_map(shifted, 0, world, disc, 20, map_context(world, 3)).actions == map.actions);
  }

  TEST_CASE("CSV and SVG outputs") {
    const policy::SoftmaxPolicy pi(disc.n_cells(), 0);
    const auto map = compute_policy_map(pi, 0, world, disc, 4, map_context(world, 0));
    std::ostringstream csv, svg;
    write_policy_map_csv(csv, map);
    const auto c = csv.str();
    CHECK(c.rfind("x,y,action\n", 0) == 0);
    CHECK(std::count(c.begin(), c.end(), '\n') == 17);
    write_policy_map_svg(svg, map, world);
    const auto s = svg.str();
    CHECK(s.find("<svg") != std::string::npos);
    CHECK(s.rfind("</svg>") != std::string::npos);
    CHECK(s.find("#9a9a9a") != std::string::npos);
    std::size_t rects = 0;
    for (auto pos = s.find("<rect"); pos != std::string::npos; pos = s.find("<rect", pos + 1)) ++rects;
    CHECK(rects >= 16);
  }
}

TEST_SUITE("fast-rate sweep") {
  TEST_CASE("family members are distinct and samples stay in the unit interval") {
    const auto a = TruncatedMixture::family_member(0, 3), b = TruncatedMixture::family_member(2, 3);
    CHECK(a.mean_a != b.mean_a);
    std::mt19937_64 rng(1);
    const auto m = sample_measure(a, 500, rng);
    CHECK(m.size() == 500);
    CHECK(m.support().minCoeff() >= 0.0);
    CHECK(m.support().maxCoeff() <= 1.0);
  }

  TEST_CASE("errors shrink as m grows") {
    SweepSpec spec;
    spec.m_values = {25, 100, 400};
    spec.replicates = 4;
    spec.ref_factor = 4;
    spec.lattice_points = 32;
    const auto r = run_fast_rate_sweep(spec);
    REQUIRE(r.points.size() == 3);
    CHECK(r.points[0].epsilon == doctest::Approx(1.0 / 25));
    CHECK(r.points[0].mean_error > r.points[1].mean_error);
    CHECK(r.points[1].mean_error > r.points[2].mean_error);
    CHECK(r.slope < 0.0);
    std::ostringstream os;
    write_fastrate_csv(os, r);
    CHECK(os.str().rfind("m,epsilon_m,mean_error,stderr,replicates\n", 0) == 0);
  }

  TEST_CASE("log-log slope of an exact power law") {
    std::vector<SweepPoint> pts;
    for (int m : {10, 100, 1000}) pts.push_back({m, 1.0 / m, 3.0 * std::pow(m, -0.75), 0.0, 1});
    CHECK(loglog_slope(pts) == doctest::Approx(-0.75));
  }

  TEST_CASE("invalid sweeps") {
    SweepSpec spec;
    spec.m_values = {};
    CHECK_THROWS_AS(spec.validate(), std::invalid_argument);
    spec = SweepSpec{};
    spec.n_measures = 0;
    CHECK_THROWS_AS(spec.validate(), std::invalid_argument);
  }
}

TEST_SUITE("comparison") {
  TEST_CASE("statistics helpers") {
    CHECK(quantile({1, 2, 3, 4}, 0.5) == doctest::Approx(2.5));
    CHECK(quantile({4, 1, 3, 2}, 0.25) == doctest::Approx(1.75));
    CHECK(median({5}) == 5.0);
    CHECK_THROWS(quantile({}, 0.5));
    std::vector<train::ConsensusDiagnostics> rows(20);
    for (int t = 0; t < 20; ++t) {
      rows[static_cast<std::size_t>(t)].iteration = t;
      rows[static_cast<std::size_t>(t)].D_t = std::exp(-0.1 * t);
      rows[static_cast<std::size_t>(t)].mean_team_reward = t < 18 ? -10.0 : -2.0;
    }
    CHECK(log_contraction_slope(rows) == doctest::Approx(-0.1));
    CHECK(final_window_reward(rows) == doctest::Approx(-2.0));
  }

  TEST_CASE("ten small runs land in one metrics file, byte-identical on rerun") {
    const auto dir = std::filesystem::temp_directory_path() / "wbc_test_comparison";
    std::filesystem::remove_all(dir);
    auto spec = small_spec(dir / "a");
    const auto result = run_comparison(spec);
    REQUIRE(result.runs.size() == 10);
    CHECK(result.all_ok());
    CHECK(result.runs[0].method == train::Method::wbc);
    CHECK(result.runs[5].method == train::Method::independent);
    CHECK(result.runs[6].seed == 1);
    write_comparison_outputs(spec, result);

    std::istringstream metrics(slurp(dir / "a" / "metrics.csv"));
    std::string line;
    std::getline(metrics, line);
    const auto header = split(line);
    CHECK(header.front() == "iteration");
    int rows = 0;
    while (std::getline(metrics, line)) {
      const auto f = split(line);
      REQUIRE(f.size() == header.size());
      CHECK(std::stoi(f[0]) >= 0);
      CHECK((f[2] == "wbc" || f[2] == "independent"));
      for (std::size_t k = 3; k < f.size(); ++k) CHECK(std::isfinite(std::stod(f[k])));
      ++rows;
    }
    CHECK(rows == 30);

    const auto svg = slurp(dir / "a" / "policy_map_wbc_0.svg");
    CHECK(svg.rfind("<?xml", 0) == 0);
    CHECK(svg.find("</svg>") != std::string::npos);
    CHECK(std::filesystem::exists(dir / "a" / "probe_probs_independent_4.csv"));
    CHECK(std::filesystem::exists(dir / "a" / "summary.csv"));

    spec.output_dir = dir / "b";
    write_comparison_outputs(spec, run_comparison(spec));
    for (const char* f : {"metrics.csv", "summary.csv", "policy_map_wbc_2.csv", "probe_probs_wbc_3.csv"}) {
      CAPTURE(f);
      CHECK(slurp(dir / "a" / f) == slurp(dir / "b" / f));
    }
    std::filesystem::remove_all(dir);
  }

  TEST_CASE("failing runs are recorded instead of aborting the comparison") {
    auto spec = small_spec(std::filesystem::temp_directory_path() / "unused");
    spec.seeds = {0};
    spec.train.sinkhorn_max_iters = 1;
    spec.train.sinkhorn_tol = 1e-14;
    const auto result = run_comparison(spec);
    REQUIRE(result.runs.size() == 2);
    for (const auto& run : result.runs) {
      CHECK_FALSE(run.ok());
      CHECK(run.error.find("no convergence") != std::string::npos);
    }
    CHECK_FALSE(result.all_ok());
    CHECK(result.summary[0].failed == 1);
    CHECK(result.summary[1].failed == 1);
  }
}
