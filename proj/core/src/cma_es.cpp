#include "craneplan/cma_es.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "craneplan/parallel.hpp"

namespace craneplan {

namespace {

// Explicit Box-Muller on top of mt19937_64 so the sample stream does not
// depend on the standard library's distribution implementation.
class NormalSource {
 public:
  explicit NormalSource(uint64_t seed) : engine_(seed) {}

  double next() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * M_PI * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

 private:
  double uniform() {
    return (engine_() >> 11) * 0x1.0p-53;  // [0, 1)
  }
  std::mt19937_64 engine_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace

CmaResult cma_optimize(const std::function<double(const Eigen::VectorXd&)>& objective,
                       const Eigen::VectorXd& x0, const CmaOptions& options) {
  const int n = static_cast<int>(x0.size());
  if (n < 1) throw std::invalid_argument("cma_optimize: empty start point");
  const int lambda = options.population > 0
                         ? options.population
                         : 4 + static_cast<int>(3.0 * std::log(n));
  if (lambda < 4) throw std::invalid_argument("cma_optimize: population must be >= 4");
  if (options.max_generations < 1)
    throw std::invalid_argument("cma_optimize: budget must cover >= 1 generation");

  // Standard rank-mu weights and cumulation constants.
  const int mu = lambda / 2;
  Eigen::VectorXd weights(mu);
  for (int i = 0; i < mu; ++i)
    weights[i] = std::log(lambda / 2.0 + 0.5) - std::log(i + 1.0);
  weights /= weights.sum();
  const double mu_eff = 1.0 / weights.squaredNorm();

  const double c_sigma = (mu_eff + 2.0) / (n + mu_eff + 5.0);
  const double d_sigma =
      1.0 + 2.0 * std::max(0.0, std::sqrt((mu_eff - 1.0) / (n + 1.0)) - 1.0) +
      c_sigma;
  const double c_c = (4.0 + mu_eff / n) / (n + 4.0 + 2.0 * mu_eff / n);
  const double c_1 = 2.0 / ((n + 1.3) * (n + 1.3) + mu_eff);
  const double c_mu = std::min(
      1.0 - c_1, 2.0 * (mu_eff - 2.0 + 1.0 / mu_eff) /
                     ((n + 2.0) * (n + 2.0) + mu_eff));
  const double chi_n =
      std::sqrt(static_cast<double>(n)) *
      (1.0 - 1.0 / (4.0 * n) + 1.0 / (21.0 * n * n));

  EsState st;
  st.mean = x0;
  st.sigma = options.sigma_init;
  st.cov = Eigen::MatrixXd::Identity(n, n);
  st.path_sigma = Eigen::VectorXd::Zero(n);
  st.path_cov = Eigen::VectorXd::Zero(n);
  st.seed = options.seed;

  NormalSource rng(options.seed);

  CmaResult res;
  res.x_best = x0;

  Eigen::MatrixXd B = Eigen::MatrixXd::Identity(n, n);
  Eigen::VectorXd D = Eigen::VectorXd::Ones(n);

  std::vector<Eigen::VectorXd> zs(lambda), ys(lambda), xs(lambda);
  std::vector<double> fs(lambda);
  int stagnation_gen = 0;
  double stagnation_f = std::numeric_limits<double>::infinity();

  for (int gen = 0; gen < options.max_generations; ++gen) {
    // Eigendecomposition with the SPD floor.
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(st.cov);
    Eigen::VectorXd evals = es.eigenvalues();
    const double floor_val =
        std::max(evals.maxCoeff() * 1e-14, 1e-300);
    evals = evals.cwiseMax(floor_val);
    B = es.eigenvectors();
    D = evals.cwiseSqrt();
    st.cov = B * evals.asDiagonal() * B.transpose();

    for (int i = 0; i < lambda; ++i) {
      Eigen::VectorXd z(n);
      for (int j = 0; j < n; ++j) z[j] = rng.next();
      zs[i] = z;
      ys[i] = B * (D.asDiagonal() * z);
      xs[i] = st.mean + st.sigma * ys[i];
    }

    parallel_for(
        lambda,
        [&](int i) {
          const double f = objective(xs[i]);
          fs[i] = std::isfinite(f) ? f : std::numeric_limits<double>::infinity();
        },
        options.threads);
    res.evaluations += lambda;

    std::vector<int> order(lambda);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return fs[a] < fs[b]; });

    if (fs[order[0]] < res.f_best) {
      res.f_best = fs[order[0]];
      res.x_best = xs[order[0]];
    }
    res.history.push_back(res.f_best);
    res.generations = gen + 1;
    st.generation = gen + 1;
    if (options.trace) options.trace(gen, res.f_best, st.sigma);

    // Recombination.
    Eigen::VectorXd y_w = Eigen::VectorXd::Zero(n);
    for (int i = 0; i < mu; ++i) y_w += weights[i] * ys[order[i]];
    st.mean += st.sigma * y_w;

    // Step-size path (C^{-1/2} y_w = B D^{-1} B^T y_w).
    const Eigen::VectorXd c_inv_y =
        B * D.cwiseInverse().asDiagonal() * (B.transpose() * y_w);
    st.path_sigma = (1.0 - c_sigma) * st.path_sigma +
                    std::sqrt(c_sigma * (2.0 - c_sigma) * mu_eff) * c_inv_y;

    const double ps_norm = st.path_sigma.norm();
    const bool h_sigma =
        ps_norm / std::sqrt(1.0 - std::pow(1.0 - c_sigma, 2.0 * (gen + 1))) <
        (1.4 + 2.0 / (n + 1.0)) * chi_n;

    st.path_cov = (1.0 - c_c) * st.path_cov;
    if (h_sigma)
      st.path_cov += std::sqrt(c_c * (2.0 - c_c) * mu_eff) * y_w;

    // Rank-one and rank-mu covariance update.
    const double delta_h = (1.0 - (h_sigma ? 1.0 : 0.0)) * c_c * (2.0 - c_c);
    Eigen::MatrixXd rank_mu = Eigen::MatrixXd::Zero(n, n);
    for (int i = 0; i < mu; ++i)
      rank_mu += weights[i] * ys[order[i]] * ys[order[i]].transpose();
    st.cov = (1.0 - c_1 - c_mu) * st.cov +
             c_1 * (st.path_cov * st.path_cov.transpose() + delta_h * st.cov) +
             c_mu * rank_mu;
    st.cov = 0.5 * (st.cov + st.cov.transpose()).eval();

    st.sigma *= std::exp((c_sigma / d_sigma) * (ps_norm / chi_n - 1.0));

    if (res.f_best <= options.f_target) {
      res.reason = CmaStop::Target;
      return res;
    }
    if (st.sigma < options.sigma_stop) {
      res.reason = CmaStop::SigmaFloor;
      return res;
    }
    if (res.f_best < stagnation_f - options.stagnation_tol) {
      stagnation_f = res.f_best;
      stagnation_gen = gen;
    } else if (gen - stagnation_gen >= options.stagnation_window) {
      res.reason = CmaStop::Stagnation;
      return res;
    }
    if (options.stop_request && options.stop_request()) {
      res.reason = CmaStop::Budget;
      return res;
    }
  }
  res.reason = CmaStop::Budget;
  return res;
}

}  // namespace craneplan
