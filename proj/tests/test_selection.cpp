#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <map>
#include <numeric>

#include "mmrelay/beamforming.hpp"
#include "mmrelay/selection.hpp"
#include "support.hpp"

using namespace mmrelay;

namespace {

using SegmentValues = std::map<int, std::pair<double, double>>;  // segment id -> (z, phase)

// |sum of per-path complex gains|^2 built from scratch: path loss at the true
// terminal distance, plus every traversed segment's fading and phase.
double aggregate_oracle(const Deployment& d, const ClusterRoutes& c, Side side, std::size_t pos,
                        double z_pair, double phase_pair, const SegmentValues& seg,
                        const ChannelParams& p) {
  const auto& paths = side == Side::incoming ? c.f_paths : c.g_paths;
  const double dist = side == Side::incoming ? c.dist_f[pos] : c.dist_g[pos];
  std::complex<double> sum{0.0, 0.0};
  for (const auto& path : paths) {
    double f = path_loss_db(d.graph(), path, dist, p) + z_pair;
    double ph = phase_pair;
    for (int s : path.segments) {
      f += seg.at(s).first;
      ph += seg.at(s).second;
    }
    sum += reconstruct_gain(f, ph);
  }
  return std::norm(sum);
}

double value_oracle(const Deployment& d, const ClusterRoutes& c, std::size_t pos,
                    const std::array<double, 2>& z_pair, const std::array<double, 2>& phase_pair,
                    const SegmentValues& seg, const ChannelParams& p) {
  const double f = aggregate_oracle(d, c, Side::incoming, pos, z_pair[0], phase_pair[0], seg, p);
  const double g = aggregate_oracle(d, c, Side::outgoing, pos, z_pair[1], phase_pair[1], seg, p);
  return p.pc() * p.ps() * f * g / (p.ps() * p.sigma_d2 * f + p.pc() * p.sigma2 * g + p.sigma2 * p.sigma_d2);
}

std::vector<SegmentPosterior> random_posteriors(std::size_t n, Rng& rng) {
  std::uniform_real_distribution<double> mean(-10.0, 10.0), var(0.5, 60.0);
  std::vector<SegmentPosterior> out(n);
  for (auto& s : out) s = {mean(rng), var(rng)};
  return out;
}

PosteriorPair random_pair(std::size_t pos, Rng& rng) {
  std::uniform_real_distribution<double> mean(-10.0, 10.0), var(1.0, 60.0), corr(-0.95, 0.95);
  PosteriorPair out;
  out.position = pos;
  out.mean = {mean(rng), mean(rng)};
  const double a = var(rng), b = var(rng), r = corr(rng);
  out.cov << a, r * std::sqrt(a * b), r * std::sqrt(a * b), b;
  return out;
}

}  // namespace

TEST_CASE("policy names") {
  for (Policy p : {Policy::ideal, Policy::random, Policy::random_constrained, Policy::saa,
                   Policy::saa_constrained}) {
    CHECK(parse_policy(policy_name(p)) == p);
  }
  CHECK_THROWS_AS(parse_policy("greedy"), ConfigError);
  CHECK(is_constrained(Policy::saa_constrained));
  CHECK(is_constrained(Policy::random_constrained));
  CHECK_FALSE(is_constrained(Policy::saa));
}

TEST_CASE("candidate sets") {
  const auto c50 = candidate_set(7, 50, CandidateMode::constrained);
  CHECK(c50.cluster == 7);
  CHECK(c50.positions == std::vector<std::size_t>{0, 1, 2, 3, 46, 47, 48, 49});
  CHECK(candidate_set(1, 1, CandidateMode::constrained).positions == std::vector<std::size_t>{0});
  CHECK(candidate_set(1, 6, CandidateMode::constrained).positions.size() == 6);
  CHECK(candidate_set(1, 8, CandidateMode::constrained).positions.size() == 8);
  CHECK(candidate_set(1, 9, CandidateMode::constrained).positions ==
        std::vector<std::size_t>{0, 1, 2, 3, 5, 6, 7, 8});
  CHECK(candidate_set(1, 10, CandidateMode::constrained).positions ==
        std::vector<std::size_t>{0, 1, 2, 3, 6, 7, 8, 9});
  for (int delta : {1, 5, 50}) {
    std::vector<std::size_t> all(static_cast<std::size_t>(delta));
    std::iota(all.begin(), all.end(), 0);
    CHECK(candidate_set(1, delta, CandidateMode::unconstrained).positions == all);
  }
  CHECK_THROWS(candidate_set(1, 0, CandidateMode::unconstrained));
}

TEST_CASE("scenario draws are reproducible and follow the draw order") {
  Rng a = stream_rng(9, 2, 1), b = stream_rng(9, 2, 1), c = stream_rng(9, 2, 1);
  const auto s1 = generate_scenarios(50, 3, a);
  auto s2 = generate_scenarios(50, 3, b);
  CHECK(s1.size() == 50);
  CHECK(s1.dim() == 3);
  CHECK(s2.v() == const_cast<ScenarioSet&>(s1).v());
  std::normal_distribution<double> normal(0.0, 1.0);
  for (std::size_t i = 0; i < 50; ++i) {
    const auto v = s1[i];
    for (std::size_t k = 0; k < 3; ++k) CHECK(v.v[k] == normal(c));
    for (std::size_t k = 0; k < 3; ++k) CHECK(v.phase[k] == unit_uniform(c));
    CHECK(v.pair[0] == normal(c));
    CHECK(v.pair[1] == normal(c));
    CHECK(v.pair_phase[0] == unit_uniform(c));
    CHECK(v.pair_phase[1] == unit_uniform(c));
  }
  Rng d = stream_rng(9, 2, 2);
  CHECK(generate_scenarios(50, 3, d).v() != s2.v());
}

TEST_CASE("scenario marginals: normal moments and uniform phases") {
  Rng rng = stream_rng(4, 0, 1);
  constexpr std::size_t n = 100000;
  auto s = generate_scenarios(n, 1, rng);
  const auto& v = s.v();
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / n;
  double var = 0.0;
  for (double x : v) var += (x - mean) * (x - mean);
  var /= n - 1;
  CHECK(std::abs(mean) < 4.0 / std::sqrt(n));
  CHECK(std::abs(var - 1.0) < 4.0 * std::sqrt(2.0 / n));

  // Kolmogorov-Smirnov against U(0,1); 1.95 / sqrt(n) is the 0.1% critical value.
  std::vector<double> ph = s.phase();
  std::sort(ph.begin(), ph.end());
  double dmax = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    dmax = std::max({dmax, (i + 1.0) / n - ph[i], ph[i] - static_cast<double>(i) / n});
  }
  CHECK(dmax < 1.95 / std::sqrt(static_cast<double>(n)));
  CHECK(ph.front() >= 0.0);
  CHECK(ph.back() < 1.0);
}

TEST_CASE("PSD square root") {
  Rng rng(1);
  for (int rep = 0; rep < 200; ++rep) {
    const auto pp = random_pair(0, rng);
    const Eigen::Matrix2d r = psd_sqrt(pp.cov);
    CHECK((r * r - pp.cov).cwiseAbs().maxCoeff() < 1e-10 * pp.cov.cwiseAbs().maxCoeff());
    CHECK((r - r.transpose()).cwiseAbs().maxCoeff() < 1e-12);
  }
  Eigen::Matrix2d rank1;
  rank1 << 4, 6, 6, 9;
  CHECK((psd_sqrt(rank1) * psd_sqrt(rank1) - rank1).cwiseAbs().maxCoeff() < 1e-10);
  CHECK(psd_sqrt(Eigen::Matrix2d::Zero()).isZero());
  Eigen::Matrix2d bad;
  bad << 1, 3, 3, 1;
  CHECK_THROWS_AS(psd_sqrt(bad), std::domain_error);
}

TEST_CASE("surrogate matches the path-by-path oracle") {
  const ChannelParams p;
  Rng rng(2);
  for (const char* name : {"paper4.json", "toy_grid3.json", "toy_square.json", "toy_collinear.json"}) {
    const Deployment d = testing::deployment(name);
    const ChannelSampler sampler(d, p);
    std::size_t dim = 0;
    for (const auto& c : sampler.clusters()) dim = std::max(dim, c.segments().size());
    const auto scenarios = generate_scenarios(20, dim, rng);
    for (std::size_t k = 0; k < d.clusters().size(); ++k) {
      const auto& routes = d.clusters()[k];
      const auto& cluster = sampler.clusters()[k];
      const auto posts = random_posteriors(cluster.segments().size(), rng);
      for (std::size_t pos = 0; pos < static_cast<std::size_t>(cluster.delta()); ++pos) {
        const auto pair = random_pair(pos, rng);
        const Eigen::Matrix2d root = psd_sqrt(pair.cov);
        for (std::size_t i = 0; i < scenarios.size(); ++i) {
          const auto s = scenarios[i];
          SegmentValues seg;
          for (std::size_t j = 0; j < posts.size(); ++j) {
            seg[cluster.segments()[j]] = {posts[j].mean + std::sqrt(posts[j].var) * s.v[j], s.phase[j]};
          }
          const Eigen::Vector2d zp = root * Eigen::Vector2d(s.pair[0], s.pair[1]) + pair.mean;
          const double want = value_oracle(d, routes, pos, {zp(0), zp(1)}, s.pair_phase, seg, p);
          const double got = surrogate_value(cluster, pos, s, posts, pair, p);
          CHECK(got == doctest::Approx(want).epsilon(1e-9));
        }
      }
    }
  }
}

TEST_CASE("surrogate with zero posterior variance is deterministic") {
  // Single path per side: phases cancel in |.|^2.
  const ChannelParams p;
  const Deployment d = testing::deployment("toy_collinear.json");
  const ChannelSampler sampler(d, p);
  const auto& cluster = sampler.clusters()[0];
  REQUIRE(cluster.paths(Side::incoming).size() == 1);
  REQUIRE(cluster.paths(Side::outgoing).size() == 1);
  std::vector<SegmentPosterior> posts(cluster.segments().size(), {3.0, 0.0});
  PosteriorPair pair;
  pair.mean = {-2.0, 1.0};
  Rng rng(3);
  const auto scenarios = generate_scenarios(30, posts.size(), rng);
  const auto& routes = d.clusters()[0];
  const double want = value_oracle(d, routes, 4, {-2.0, 1.0}, {0.0, 0.0},
                                   [&] {
                                     SegmentValues seg;
                                     for (int s : cluster.segments()) seg[s] = {3.0, 0.0};
                                     return seg;
                                   }(),
                                   p);
  for (std::size_t i = 0; i < scenarios.size(); ++i) {
    CHECK(surrogate_value(cluster, 4, scenarios[i], posts, pair, p) == doctest::Approx(want).epsilon(1e-10));
  }
}

TEST_CASE("SAA objective is the scenario mean of the surrogate") {
  const ChannelParams p;
  Rng rng(4);
  for (const char* name : {"paper4.json", "toy_grid3.json"}) {
    const Deployment d = testing::deployment(name);
    const ChannelSampler sampler(d, p);
    for (const auto& cluster : sampler.clusters()) {
      const auto scenarios = generate_scenarios(64, cluster.segments().size() + 2, rng);
      const auto posts = random_posteriors(cluster.segments().size(), rng);
      std::vector<PosteriorPair> pairs;
      for (std::size_t pos = 0; pos < static_cast<std::size_t>(cluster.delta()); ++pos) {
        pairs.push_back(random_pair(pos, rng));
      }
      for (auto mode : {CandidateMode::unconstrained, CandidateMode::constrained}) {
        const auto cand = candidate_set(cluster.id(), cluster.delta(), mode);
        const auto decision = saa_select(cluster, cand, posts, pairs, scenarios, p, 5);
        CHECK(decision.slot == 5);
        CHECK(decision.cluster == cluster.id());
        REQUIRE(decision.values.size() == cand.positions.size());
        std::size_t best = 0;
        for (std::size_t k = 0; k < cand.positions.size(); ++k) {
          double mean = 0.0;
          for (std::size_t i = 0; i < scenarios.size(); ++i) {
            mean += surrogate_value(cluster, cand.positions[k], scenarios[i], posts, pairs[cand.positions[k]], p);
          }
          mean /= static_cast<double>(scenarios.size());
          CHECK(decision.values[k] == doctest::Approx(mean).epsilon(1e-9));
          if (mean > decision.values[best] * (1 + 1e-9)) best = k;
        }
        CHECK(std::find(cand.positions.begin(), cand.positions.end(), decision.position) != cand.positions.end());
        CHECK(decision.values[best] <= *std::max_element(decision.values.begin(), decision.values.end()));
      }
    }
  }
}

TEST_CASE("SAA selection properties") {
  const ChannelParams p;
  const Deployment d = testing::deployment("paper4.json");
  const ChannelSampler sampler(d, p);
  const auto& cluster = sampler.clusters()[1];
  Rng rng(5);
  const auto scenarios = generate_scenarios(200, cluster.segments().size(), rng);
  const auto posts = random_posteriors(cluster.segments().size(), rng);
  const auto n = static_cast<std::size_t>(cluster.delta());
  std::vector<PosteriorPair> pairs(n);
  for (std::size_t pos = 0; pos < n; ++pos) {
    pairs[pos].position = pos;
    pairs[pos].cov = prior_pair(p, cluster.d_max());
  }

  SUBCASE("single candidate") {
    CandidateSet one{cluster.id(), CandidateMode::unconstrained, {6}};
    CHECK(saa_select(cluster, one, posts, pairs, scenarios, p, 2).position == 6);
  }
  SUBCASE("a 20 dB mean advantage wins") {
    for (std::size_t target : {std::size_t{2}, std::size_t{5}, n - 1}) {
      auto shifted = pairs;
      shifted[target].mean = {20.0, 20.0};
      const auto cand = candidate_set(cluster.id(), cluster.delta(), CandidateMode::unconstrained);
      CHECK(saa_select(cluster, cand, posts, shifted, scenarios, p, 2).position == target);
    }
  }
  SUBCASE("scenario order does not matter") {
    const auto cand = candidate_set(cluster.id(), cluster.delta(), CandidateMode::unconstrained);
    const auto a = saa_select(cluster, cand, posts, pairs, scenarios, p, 2);
    ScenarioSet reversed(scenarios.size(), scenarios.dim());
    const auto dim = scenarios.dim();
    for (std::size_t i = 0; i < scenarios.size(); ++i) {
      const auto s = scenarios[scenarios.size() - 1 - i];
      std::copy(s.v.begin(), s.v.end(), reversed.v().begin() + static_cast<std::ptrdiff_t>(i * dim));
      std::copy(s.phase.begin(), s.phase.end(), reversed.phase().begin() + static_cast<std::ptrdiff_t>(i * dim));
      reversed.pair()[2 * i] = s.pair[0];
      reversed.pair()[2 * i + 1] = s.pair[1];
      reversed.pair_phase()[2 * i] = s.pair_phase[0];
      reversed.pair_phase()[2 * i + 1] = s.pair_phase[1];
    }
    const auto b = saa_select(cluster, cand, posts, pairs, reversed, p, 2);
    CHECK(a.position == b.position);
    for (std::size_t k = 0; k < a.values.size(); ++k) {
      CHECK(a.values[k] == doctest::Approx(b.values[k]).epsilon(1e-12));
    }
  }
  SUBCASE("ties go to the lowest index") {
    const auto one = generate_scenarios(1, cluster.segments().size(), rng);
    std::vector<PosteriorPair> flat(n);
    // identical pair posteriors but different terminal distances: force ties
    // by passing the same candidate twice
    CandidateSet twice{cluster.id(), CandidateMode::unconstrained, {3, 3}};
    for (std::size_t pos = 0; pos < n; ++pos) flat[pos].position = pos;
    const auto dec = saa_select(cluster, twice, posts, flat, one, p, 2);
    CHECK(dec.values[0] == dec.values[1]);
    CHECK(dec.position == 3);
  }
  SUBCASE("mismatched posteriors are rejected") {
    const auto cand = candidate_set(cluster.id(), cluster.delta(), CandidateMode::unconstrained);
    std::vector<SegmentPosterior> short_posts(posts.begin(), posts.end() - 1);
    CHECK_THROWS(saa_select(cluster, cand, short_posts, pairs, scenarios, p, 2));
  }
}

TEST_CASE("ideal selection is the brute-force argmax of the realized value") {
  const ChannelParams p;
  for (const char* name : {"paper4.json", "toy_grid3.json"}) {
    const Deployment d = testing::deployment(name);
    const ChannelSampler sampler(d, p);
    for (std::uint64_t trial = 0; trial < 5; ++trial) {
      Rng rng = stream_rng(77, trial, 0);
      const auto real = sampler.sample(rng);
      for (int t = 1; t <= p.n_t; t += 7) {
        SegmentValues seg;
        for (std::size_t j = 0; j < real.segments.size(); ++j) {
          const auto& s = real.segments[j];
          seg[s.segment] = {s.z(t), s.phase[static_cast<std::size_t>(t - 1)]};
        }
        for (std::size_t k = 0; k < d.clusters().size(); ++k) {
          const auto& cluster = sampler.clusters()[k];
          const auto& field = real.clusters[k];
          for (auto mode : {CandidateMode::unconstrained, CandidateMode::constrained}) {
            const auto cand = candidate_set(cluster.id(), cluster.delta(), mode);
            const auto dec = ideal_select(cluster, k, real, t, cand, p);
            double best = -1.0;
            std::size_t arg = 0;
            for (std::size_t pos : cand.positions) {
              const double v = value_oracle(
                  d, d.clusters()[k], pos, {field.z(t, Side::incoming, pos), field.z(t, Side::outgoing, pos)},
                  {field.phase[field.index(t, Side::incoming, pos)], field.phase[field.index(t, Side::outgoing, pos)]},
                  seg, p);
              if (v > best) {
                best = v;
                arg = pos;
              }
            }
            CHECK(dec.position == arg);
            CHECK(*std::max_element(dec.values.begin(), dec.values.end()) == doctest::Approx(best).epsilon(1e-9));
          }
        }
      }
    }
  }
}

TEST_CASE("ideal selection follows a perturbed field") {
  const ChannelParams p;
  const Deployment d = testing::deployment("paper4.json");
  const ChannelSampler sampler(d, p);
  Rng rng = stream_rng(5, 0, 0);
  auto real = sampler.sample(rng);
  const auto& cluster = sampler.clusters()[2];
  const auto cand = candidate_set(cluster.id(), cluster.delta(), CandidateMode::unconstrained);
  for (std::size_t target = 0; target < cand.positions.size(); ++target) {
    auto boosted = real;
    auto& f = boosted.clusters[2];
    f.beta[f.index(3, Side::incoming, target)] += 60.0;
    f.beta[f.index(3, Side::outgoing, target)] += 60.0;
    CHECK(ideal_select(cluster, 2, boosted, 3, cand, p).position == target);
  }
}

TEST_CASE("random selection is uniform over its candidate set") {
  Rng rng(6);
  const auto cand = candidate_set(1, 50, CandidateMode::constrained);
  std::map<std::size_t, int> counts;
  constexpr int n = 80000;
  for (int i = 0; i < n; ++i) {
    const auto dec = random_select(cand, rng, 2);
    ++counts[dec.position];
    CHECK(dec.values.empty());
  }
  CHECK(counts.size() == cand.positions.size());
  const double expected = static_cast<double>(n) / static_cast<double>(cand.positions.size());
  double chi2 = 0.0;
  for (std::size_t pos : cand.positions) chi2 += std::pow(counts[pos] - expected, 2) / expected;
  // 7 degrees of freedom, 0.1% critical value 24.32
  CHECK(chi2 < 24.32);
  CHECK_THROWS(random_select(CandidateSet{}, rng, 2));
}

TEST_CASE("CSI overhead") {
  const Deployment paper4 = testing::deployment("paper4.json");
  CHECK(csi_overhead(Policy::ideal, paper4) == 80);
  CHECK(csi_overhead(Policy::saa, paper4) == 21);
  CHECK(csi_overhead(Policy::saa_constrained, paper4) == 21);
  CHECK(csi_overhead(Policy::random, paper4) == 8);

  auto cfg = testing::load("paper4.json");
  for (auto& c : cfg.topology.clusters) c.delta = 50;
  const Deployment big = Deployment::build(cfg.topology);
  CHECK(csi_overhead(Policy::ideal, big) == 400);
  CHECK(csi_overhead(Policy::saa, big) == 21);

  auto square = testing::load("toy_square.json");
  square.topology.clusters[0].delta = 1;
  const Deployment sq = Deployment::build(square.topology);
  CHECK(csi_overhead(Policy::ideal, sq) == 2);
  CHECK(csi_overhead(Policy::saa, sq) == 5);
}
