#include "support/oracles.hpp"

#include "wbc/train/baselines.hpp"
#include "wbc/train/trainer.hpp"

#include <doctest.h>

#include <sstream>

using namespace wbc;
using namespace wbc::train;

namespace {

TrainConfig tiny_config() {
  TrainConfig cfg;
  cfg.batch_episodes = 2;
  cfg.atoms_per_agent = 16;
  cfg.iterations = 3;
  return cfg;
}

env::WorldConfig short_world() {
  env::WorldConfig w;
  w.episode_length = 20;
  return w;
}

SoftmaxPolicy random_policy(int cells, int id, std::mt19937_64& rng) {
  SoftmaxPolicy pi(cells, id);
  std::normal_distribution<double> n(0.0, 0.7);
  for (Eigen::Index r = 0; r < pi.logits().rows(); ++r) {
    for (Eigen::Index c = 0; c < pi.logits().cols(); ++c) pi.logits()(r, c) = n(rng);
  }
  return pi;
}

// Uniform measure over the embeddings of the listed visits.
AgentBatch batch_from(std::vector<Visit> visits) {
  AgentBatch b;
  b.visits = std::move(visits);
  Matrix s(static_cast<Eigen::Index>(b.visits.size()), ot::kEmbeddingDims);
  for (std::size_t k = 0; k < b.visits.size(); ++k) {
    b.atoms.push_back(k);
    s.row(static_cast<Eigen::Index>(k)) =
        ot::embed_state_action(b.visits[k].state, b.visits[k].action).coords.transpose();
  }
  b.measure = ot::DiscreteMeasure::uniform(std::move(s));
  return b;
}

std::string csv_of(const TrainingRun& run, int n_agents) {
  std::ostringstream os;
  write_diagnostics_header(os, n_agents);
  for (const auto& d : run.diagnostics) write_diagnostics_row(os, d);
  return os.str();
}

}  // namespace

TEST_SUITE("schedule") {
  TEST_CASE("fixed mode holds the defaults") {
    const TrainConfig cfg;
    for (int t = 0; t < cfg.iterations; t += 37) {
      const auto s = schedule_step(cfg, t);
      CHECK(s.lambda == 0.5);
      CHECK(s.epsilon == 0.1);
    }
  }

  TEST_CASE("anneal endpoints") {
    TrainConfig cfg;
    cfg.schedule = ScheduleMode::anneal;
    cfg.iterations = 100;
    cfg.anneal_fraction = 0.5;
    CHECK(schedule_step(cfg, 0).lambda == cfg.lambda0);
    CHECK(schedule_step(cfg, 0).epsilon == cfg.epsilon0);
    for (int t : {50, 75, 99}) {
      CHECK(schedule_step(cfg, t).lambda == cfg.lambda_min);
      CHECK(schedule_step(cfg, t).epsilon == cfg.epsilon_min);
    }
    const auto mid = schedule_step(cfg, 25);
    CHECK(mid.lambda == doctest::Approx(0.5 * (cfg.lambda0 + cfg.lambda_min)));
    CHECK(mid.epsilon == doctest::Approx(std::sqrt(cfg.epsilon0 * cfg.epsilon_min)));
    CHECK_THROWS_AS(schedule_step(cfg, 100), std::out_of_range);
  }

  TEST_CASE("config validation") {
    TrainConfig cfg;
    cfg.lambda0 = -1.0;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = TrainConfig{};
    cfg.epsilon0 = 0.0;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = TrainConfig{};
    cfg.alpha = 0.0;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    CHECK(parse_method("kl_reg") == Method::kl_reg);
    CHECK_THROWS_AS(parse_method("ippo"), std::invalid_argument);
  }
}

TEST_SUITE("rollouts") {
  TEST_CASE("deterministic, uniform, and consistent with the back-references") {
    const auto world = short_world();
    const auto cfg = tiny_config();
    std::mt19937_64 seeder(1);
    std::vector<SoftmaxPolicy> pols;
    for (int i = 0; i < world.n_agents; ++i) pols.push_back(random_policy(cfg.discretizer.n_cells(), i, seeder));

    std::mt19937_64 r1(5), r2(5);
    const auto a = collect_rollouts(pols, world, cfg, r1);
    const auto b = collect_rollouts(pols, world, cfg, r2);
    REQUIRE(a.agents.size() == 3);
    CHECK(a.episodes == cfg.batch_episodes);
    CHECK(a.mean_team_reward == b.mean_team_reward);
    CHECK(a.mean_team_reward <= 0.0);
    for (std::size_t i = 0; i < 3; ++i) {
      const auto& ag = a.agents[i];
      CHECK(ag.visits.size() == static_cast<std::size_t>(cfg.batch_episodes * world.episode_length));
      CHECK(ag.atoms == b.agents[i].atoms);
      REQUIRE(ag.measure.size() == cfg.atoms_per_agent);
      CHECK((ag.measure.weights().array() - 1.0 / cfg.atoms_per_agent).abs().maxCoeff() == 0.0);
      auto sorted = ag.atoms;
      std::sort(sorted.begin(), sorted.end());
      CHECK(std::adjacent_find(sorted.begin(), sorted.end()) == sorted.end());
      for (std::size_t k = 0; k < ag.atoms.size(); ++k) {
        const auto& v = ag.visits[ag.atoms[k]];
        CHECK(ag.measure.support().row(static_cast<Eigen::Index>(k)).transpose() ==
              ot::embed_state_action(v.state, v.action).coords);
      }
    }
  }

  TEST_CASE("reward-to-go is the undiscounted tail sum") {
    auto world = short_world();
    world.episode_length = 6;
    TrainConfig cfg = tiny_config();
    cfg.batch_episodes = 1;
    std::vector<SoftmaxPolicy> pols;
    for (int i = 0; i < 3; ++i) pols.emplace_back(cfg.discretizer.n_cells(), i);
    std::mt19937_64 rng(2);
    std::vector<env::TrajectoryRow> traj;
    const auto batch = collect_rollouts(pols, world, cfg, rng, &traj);
    REQUIRE(traj.size() == 18);
    for (int i = 0; i < 3; ++i) {
      const auto& visits = batch.agents[static_cast<std::size_t>(i)].visits;
      for (int t = 0; t < 6; ++t) {
        double tail = 0.0;
        for (const auto& row : traj) {
          if (row.agent == i && row.step >= t) tail += row.reward;
        }
        CHECK(visits[static_cast<std::size_t>(t)].reward_to_go == doctest::Approx(tail).epsilon(1e-12));
        CHECK(visits[static_cast<std::size_t>(t)].step == t);
      }
    }
  }

  TEST_CASE("atoms are drawn with replacement when visits run short") {
    auto world = short_world();
    world.episode_length = 5;
    TrainConfig cfg = tiny_config();
    cfg.batch_episodes = 1;
    cfg.atoms_per_agent = 12;
    std::vector<SoftmaxPolicy> pols;
    for (int i = 0; i < 3; ++i) pols.emplace_back(cfg.discretizer.n_cells(), i);
    std::mt19937_64 rng(3);
    const auto batch = collect_rollouts(pols, world, cfg, rng);
    CHECK(batch.agents[0].visits.size() == 5);
    CHECK(batch.agents[0].atoms.size() == 12);
    CHECK(batch.agents[0].measure.size() == 12);
  }
}

TEST_SUITE("reward gradient") {
  TEST_CASE("equal returns cancel against the baseline") {
    SoftmaxPolicy pi(4, 0);
    const auto b = batch_from({{0, ot::Action::right, {0, 0}, -2.0, 0},
                               {1, ot::Action::left, {0, 0}, -2.0, 0},
                               {3, ot::Action::up, {0, 0}, -2.0, 0}});
    CHECK(reward_gradient(b, pi).isZero());
  }

  TEST_CASE("positive advantage on right raises its probability") {
    SoftmaxPolicy pi(2, 0);
    const auto b = batch_from({{1, ot::Action::right, {0, 0}, -1.0, 0}, {1, ot::Action::stay, {0, 0}, -3.0, 0}});
    const auto g = reward_gradient(b, pi);
    CHECK(g.row(0).isZero());
    const double before = pi.action_probs(1)[1];
    pi.logits() += 0.5 * g;
    CHECK(pi.action_probs(1)[1] > before);
  }

  TEST_CASE("batch average points along the exact gradient of a two-cell toy problem") {
    // Two steps. Step 0 always starts in cell 0; right or up moves to cell 1,
    // anything else stays in cell 0. Rewards depend on (cell, action).
    const double r0[5] = {-1.0, 0.0, -1.0, -0.5, -1.0};
    const double r1[2][5] = {{-1.0, -0.5, 0.0, -1.0, 0.0}, {0.0, 1.0, -1.0, 0.0, -0.5}};
    auto next_cell = [](int a) { return a == 1 || a == 3 ? 1 : 0; };
    auto expected_return = [&](const Matrix& th) {
      const Vector p0 = oracle::softmax(th.row(0));
      double j = 0.0;
      for (int a0 = 0; a0 < 5; ++a0) {
        const int c = next_cell(a0);
        const Vector p1 = oracle::softmax(th.row(c));
        double tail = 0.0;
        for (int a1 = 0; a1 < 5; ++a1) tail += p1[a1] * r1[c][a1];
        j += p0[a0] * (r0[a0] + tail);
      }
      return j;
    };

    std::mt19937_64 rng(11);
    auto pi = random_policy(2, 0, rng);
    const Matrix exact = oracle::central_diff(expected_return, pi.logits(), 1e-6);

    Matrix mean = Matrix::Zero(2, 5);
    const int batches = 200, episodes = 8;
    for (int b = 0; b < batches; ++b) {
      std::vector<Visit> visits;
      for (int e = 0; e < episodes; ++e) {
        const auto a0 = pi.sample_action(0, rng);
        const int c = next_cell(static_cast<int>(a0));
        const auto a1 = pi.sample_action(c, rng);
        const double g1 = r1[c][static_cast<int>(a1)];
        visits.push_back({0, a0, {0, 0}, r0[static_cast<int>(a0)] + g1, 0});
        visits.push_back({c, a1, {0, 0}, g1, 1});
      }
      AgentBatch batch;
      batch.visits = std::move(visits);
      mean += reward_gradient(batch, pi);
    }
    mean /= batches;
    const double cosine = (mean.array() * exact.array()).sum() / (mean.norm() * exact.norm());
    CHECK(cosine >= 0.8);
  }
}

TEST_SUITE("consensus gradient") {
  TEST_CASE("identical measures give a vanishing gradient") {
    std::mt19937_64 rng(12);
    const auto pi = random_policy(25, 0, rng);
    const auto b = batch_from({{3, ot::Action::right, {0.1, -0.2}, 0.0, 0},
                               {11, ot::Action::up, {-0.3, 0.05}, 0.0, 0},
                               {20, ot::Action::stay, {0.2, 0.2}, 0.0, 0}});
    ot::SinkhornConfig cfg;
    cfg.epsilon = 1e-3;
    cfg.tol = 1e-9;
    const auto g = consensus_gradient(b, b.measure, pi, cfg, 0.8);
    CHECK(g.norm() <= 10.0 * cfg.tol);
  }

  TEST_CASE("unvisited rows stay zero and the frozen-coupling derivative matches finite differences") {
    std::mt19937_64 rng(13);
    const auto pi = random_policy(25, 0, rng);
    const std::vector<Visit> visits{{3, ot::Action::right, {0.1, -0.2}, 0.0, 0},
                                    {11, ot::Action::up, {-0.3, 0.05}, 0.0, 0},
                                    {20, ot::Action::stay, {0.2, 0.2}, 0.0, 0}};
    const auto b = batch_from(visits);
    Matrix tgt(4, 4);
    tgt << 0.0, 0.0, 1.0, 0.0, -0.2, 0.1, 0.0, 1.0, 0.3, -0.1, 0.0, 0.0, 0.1, 0.3, -1.0, 0.0;
    const ot::DiscreteMeasure target(tgt, Vector{{0.1, 0.2, 0.3, 0.4}});
    ot::SinkhornConfig cfg;
    cfg.epsilon = 0.1;
    cfg.tol = 1e-10;

    const auto g = consensus_gradient(b, target, pi, cfg, 0.8);
    for (int c = 0; c < 25; ++c) {
      if (c != 3 && c != 11 && c != 20) CHECK(g.row(c).isZero());
    }

    // Each atom carries its conditional transport cost h_k; perturbing the
    // logits reweights atom k by the likelihood ratio of its action.
    const Matrix cost = oracle::costs(b.measure.support(), target.support(), 0.8, 2);
    const Matrix plan = oracle::sinkhorn_plan(b.measure.weights(), target.weights(), cost, cfg.epsilon, 5000);
    Vector h(3);
    for (int k = 0; k < 3; ++k) h[k] = (plan.row(k).array() * cost.row(k).array()).sum() * 3.0;
    auto reweighted = [&](const Matrix& th) {
      double v = 0.0;
      for (int k = 0; k < 3; ++k) {
        const auto& vis = visits[static_cast<std::size_t>(k)];
        const int a = static_cast<int>(vis.action);
        v += h[k] / 3.0 * oracle::softmax(th.row(vis.cell))[a] / pi.action_probs(vis.cell)[a];
      }
      return v;
    };
    const Matrix fd = oracle::central_diff(reweighted, pi.logits(), 1e-5);
    for (int c : {3, 11, 20}) {
      CHECK((g.row(c) - fd.row(c)).norm() <= 0.05 * fd.row(c).norm());
    }
  }
}

TEST_SUITE("steps") {
  TEST_CASE("lambda = 0 makes wbc_step and kl_consensus_step identical to independent_step") {
    auto cfg = tiny_config();
    cfg.lambda0 = 0.0;
    const auto world = train::world_for_seed(short_world(), 4);
    for (Method m : {Method::wbc, Method::kl_reg}) {
      auto p1 = initial_policies(world, cfg), p2 = initial_policies(world, cfg);
      std::mt19937_64 r1(4), r2(4);
      for (int t = 0; t < cfg.iterations; ++t) {
        const auto d1 = method_step(m, p1, world, cfg, t, r1);
        const auto d2 = independent_step(p2, world, cfg, t, r2);
        CHECK(d1.D_t == d2.D_t);
        CHECK(d1.mean_team_reward == d2.mean_team_reward);
        CHECK(d2.method == Method::independent);
      }
      for (std::size_t i = 0; i < p1.size(); ++i) CHECK(p1[i].logits() == p2[i].logits());
    }
  }

  TEST_CASE("consensus changes the update when lambda > 0") {
    const auto cfg = tiny_config();
    const auto world = train::world_for_seed(short_world(), 4);
    auto p1 = initial_policies(world, cfg), p2 = initial_policies(world, cfg);
    std::mt19937_64 r1(4), r2(4);
    wbc_step(p1, world, cfg, 0, r1);
    independent_step(p2, world, cfg, 0, r2);
    CHECK(p1[0].logits() != p2[0].logits());
  }

  TEST_CASE("parameter sharing applies the mean reward gradient to one table") {
    const auto cfg = tiny_config();
    const auto world = train::world_for_seed(short_world(), 6);
    std::mt19937_64 rng(6);
    auto shared_rng = rng;
    std::vector<SoftmaxPolicy> pols;
    for (int i = 0; i < 3; ++i) pols.emplace_back(cfg.discretizer.n_cells(), i);
    const auto batch = collect_rollouts(pols, world, cfg, rng);
    PolicyGradient g = pols[0].zero_gradient();
    for (const auto& a : batch.agents) g += reward_gradient(a, pols[0]);
    g /= 3.0;
    clip_rows(g, cfg.grad_clip);

    SoftmaxPolicy shared(cfg.discretizer.n_cells(), 0);
    const auto d = shared_params_step(shared, world, cfg, 0, shared_rng);
    CHECK(d.method == Method::param_share);
    CHECK((shared.logits() - cfg.alpha * g).cwiseAbs().maxCoeff() <= 1e-12);

    auto many = initial_policies(world, cfg);
    std::mt19937_64 r2(6);
    for (int t = 0; t < 2; ++t) method_step(Method::param_share, many, world, cfg, t, r2);
    for (const auto& pi : many) CHECK(pi.logits() == many[0].logits());
  }

  TEST_CASE("the KL penalty vanishes for identical policies") {
    std::mt19937_64 rng(7);
    const auto base = random_policy(8, 0, rng);
    const std::vector<SoftmaxPolicy> same{base, base, base};
    const Matrix ref = mixture_reference(same);
    const std::vector<CellId> cells{0, 3, 7};
    CHECK(base.kl_to_reference(ref, cells).second.cwiseAbs().maxCoeff() <= 1e-15);
  }

  TEST_CASE("clip_rows caps row norms only") {
    Matrix g{{3.0, 4.0, 0, 0, 0}, {0.3, 0.4, 0, 0, 0}};
    clip_rows(g, 1.0);
    CHECK(g.row(0).norm() == doctest::Approx(1.0));
    CHECK(g.row(1).norm() == doctest::Approx(0.5));
  }
}

TEST_SUITE("training runs") {
  TEST_CASE("two iterations give two finite rows, and reruns are byte-identical") {
    auto cfg = tiny_config();
    cfg.iterations = 2;
    cfg.seed = 3;
    const auto world = short_world();
    for (Method m : {Method::wbc, Method::independent, Method::kl_reg, Method::param_share}) {
      int sunk = 0;
      const auto run = run_training(m, world, cfg, [&](const ConsensusDiagnostics&) { ++sunk; });
      REQUIRE(run.diagnostics.size() == 2);
      CHECK(sunk == 2);
      for (const auto& d : run.diagnostics) {
        CHECK(d.method == m);
        CHECK(d.seed == 3);
        CHECK(std::isfinite(d.D_t));
        CHECK(d.D_t >= -cfg.sinkhorn_tol);
        CHECK(d.mean_team_reward <= 0.0);
        CHECK(d.bary_residual <= cfg.sinkhorn_tol);
        CHECK(d.wall_ms == 0.0);
        REQUIRE(d.div_to_bary.size() == 3);
        for (double x : d.div_to_bary) {
          CHECK(std::isfinite(x));
          CHECK(x <= d.D_t + 2.0 * cfg.sinkhorn_tol);
        }
      }
      CHECK(csv_of(run, 3) == csv_of(run_training(m, world, cfg), 3));
    }
  }

  TEST_CASE("diagnostics CSV layout") {
    std::ostringstream os;
    write_diagnostics_header(os, 3);
    CHECK(os.str() ==
          "iteration,seed,method,D_t,div_to_bary_agent_0,div_to_bary_agent_1,div_to_bary_agent_2,"
          "mean_team_reward,lambda_t,epsilon_t,bary_residual,wall_ms\n");
    ConsensusDiagnostics d;
    d.div_to_bary = {0.1, 0.2, 0.3};
    std::ostringstream row;
    write_diagnostics_row(row, d);
    std::string line = row.str();
    CHECK(std::count(line.begin(), line.end(), ',') == 11);
  }

  TEST_CASE("anneal schedule runs and reports the schedule") {
    auto cfg = tiny_config();
    cfg.schedule = ScheduleMode::anneal;
    cfg.iterations = 4;
    const auto run = run_training(Method::wbc, short_world(), cfg);
    CHECK(run.diagnostics.front().lambda_t == cfg.lambda0);
    CHECK(run.diagnostics.back().epsilon_t == cfg.epsilon_min);
  }

  TEST_CASE("sliced diagnostics are used on request") {
    auto cfg = tiny_config();
    cfg.iterations = 1;
    cfg.use_sliced_for_diagnostics = true;
    const auto run = run_training(Method::wbc, short_world(), cfg);
    CHECK(run.diagnostics[0].D_t > 0.0);
  }

  TEST_CASE("solver failures propagate") {
    auto cfg = tiny_config();
    cfg.sinkhorn_max_iters = 1;
    cfg.sinkhorn_tol = 1e-14;
    std::vector<ConsensusDiagnostics> rows;
    CHECK_THROWS_AS(run_training(Method::wbc, short_world(), cfg,
                                 [&](const ConsensusDiagnostics& d) { rows.push_back(d); }),
                    ConvergenceError);
  }
}
