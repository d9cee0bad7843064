// Library walkthrough: load a model, check stabilizability, simulate one
// trajectory and track it with filters started from two different priors.
//
//   filter_demo [model.json]

#include <cstdio>
#include <iostream>
#include <string>

#include "wonham/wonham.hpp"

using namespace wonham;

int main(int argc, char** argv) {
  const std::string path = argc > 1 ? argv[1] : std::string(WONHAM_MODELS_DIR) + "/asym2.json";
  try {
    const HmmModel model = load_model(path);
    const auto stab = stabilizability(model);
    std::printf("model %s: d = %ld, dim C = %ld, %s\n", model.name().c_str(), static_cast<long>(model.d()),
                static_cast<long>(stab.controllable_dim), stab.verdict ? "stabilizable" : "not stabilizable");

    const double T = 5.0, dt = 1e-3;
    const auto mu = ProbabilityVector::uniform(model.d());
    const Trial trial = simulate_trial(model, mu, T, dt, RngStream(2024, 0));

    // A wrong, concentrated prior for comparison.
    const auto nu = ProbabilityVector::point_mass(model.d(), model.d() - 1);
    const Matrix P = transition_matrix(model, dt);
    WonhamFilter good(model, mu, dt, P);
    WonhamFilter bad(model, nu, dt, P);
    const Vector f = Vector::Unit(model.d(), 0);

    std::printf("%6s %6s %10s %10s\n", "t", "X_t", "pi_mu(f)", "pi_nu(f)");
    const auto states = trial.path.grid_states(dt, trial.obs.n_steps());
    for (std::size_t k = 0; k <= trial.obs.n_steps(); ++k) {
      if (k % 500 == 0)
        std::printf("%6.2f %6ld %10.6f %10.6f\n", static_cast<double>(k) * dt, static_cast<long>(states[k] + 1), good.expect(f),
                    bad.expect(f));
      if (k < trial.obs.n_steps()) {
        good.step(trial.obs.increments[k]);
        bad.step(trial.obs.increments[k]);
      }
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
