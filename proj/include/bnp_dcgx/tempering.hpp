#pragma once

// Replica exchange over a fixed temperature ladder.
//
// Each chain owns its state and its random stream. Chains run swap_interval
// sweeps independently (optionally on separate threads), then adjacent pairs
// in temperature order propose to exchange states, alternating between the
// (1,2),(3,4),... and (2,3),(4,5),... pairings. A swap moves the states; the
// temperatures and random streams stay with their chain slot, so results do
// not depend on thread scheduling.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <numeric>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "likelihood.hpp"
#include "model.hpp"
#include "random.hpp"
#include "sampler.hpp"

namespace dcgx {

/// Stream index reserved for swap decisions.
inline constexpr std::uint64_t kSwapStream = 0x5a5a5a5aULL;

struct TemperingSchedule {
  std::vector<double> temperatures;
  int swap_interval = 10;

  static TemperingSchedule from(const Hyperparams& hp) { return {hp.temperatures, hp.swap_interval}; }

  void validate() const {
    Hyperparams probe;
    probe.temperatures = temperatures;
    probe.swap_interval = swap_interval;
    probe.validate();
  }

  /// Chain indices ordered by increasing temperature.
  std::vector<std::size_t> ladder() const {
    std::vector<std::size_t> order(temperatures.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return temperatures[a] < temperatures[b]; });
    return order;
  }
};

struct TemperingOptions {
  int threads = 0;  // 0: BNP_DCGX_THREADS, else hardware concurrency
  bool keep_tau = true;
  // Skip schedule validation; lets tests run several chains at T = 1.
  bool unchecked_schedule = false;
  std::function<void(int iteration, int total)> progress;
};

inline int worker_count(int requested, std::size_t chains) {
  int threads = requested;
  if (threads <= 0) {
    if (const char* env = std::getenv("BNP_DCGX_THREADS")) threads = std::atoi(env);
  }
  if (threads <= 0) threads = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  return std::clamp(threads, 1, static_cast<int>(std::max<std::size_t>(1, chains)));
}

inline double state_swap_energy(const ChainState& state, const Dataset& data, const Hyperparams& hp) {
  double energy = state_y_loglik(state, data, hp.strict_paper_det);
  if (hp.include_x_in_swap) energy += state_x_logmarginal(state, data, hp.omega);
  return energy;
}

/// Log acceptance ratio for exchanging the states of chains a and b.
inline double swap_log_ratio(const ChainState& a, const ChainState& b, const Dataset& data,
                             const Hyperparams& hp) {
  if (a.temperature == b.temperature) return 0.0;
  const double diff = state_swap_energy(a, data, hp) - state_swap_energy(b, data, hp);
  return (1.0 / b.temperature - 1.0 / a.temperature) * diff;
}

/// Exchange the sampled content of two chains, leaving each chain's
/// temperature and stream in place.
inline void exchange_states(ChainState& a, ChainState& b) {
  std::swap(a.xi, b.xi);
  std::swap(a.clusters, b.clusters);
  std::swap(a.tau, b.tau);
}

namespace detail {

struct ChainSlot {
  ChainState state;
  Rng rng;
  double tau_prop = 0.05;
  BUpdateStats kept_b;  // post burn-in totals
};

inline void advance_chain(ChainSlot& slot, const Dataset& data, const Hyperparams& hp, int first_iter,
                          int count, bool record, Trace* trace, bool keep_tau) {
  for (int s = 0; s < count; ++s) {
    const int iter = first_iter + s;
    const SweepStats stats = sweep(slot.state, data, hp, slot.rng, slot.tau_prop);
    if (iter < hp.n_burn) {
      if (hp.adapt_tau_prop && stats.b.proposals > 0) {
        const double rate = static_cast<double>(stats.b.accepts) / stats.b.proposals;
        const double step = 1.0 / std::pow(static_cast<double>(iter + 1), 0.6);
        slot.tau_prop = std::clamp(slot.tau_prop * std::exp(step * (rate - 0.3)), 1e-4, 1.0);
      }
      continue;
    }
    slot.kept_b.proposals += stats.b.proposals;
    slot.kept_b.accepts += stats.b.accepts;
    if (!record) continue;
    Snapshot snap;
    snap.iteration = iter + 1;
    snap.xi = slot.state.xi;
    snap.clusters = slot.state.clusters;
    if (keep_tau) snap.tau = slot.state.tau;
    snap.loglik = state_y_loglik(slot.state, data, hp.strict_paper_det);
    trace->samples.push_back(std::move(snap));
  }
}

}  // namespace detail

/// Run all chains and return the retained samples of the T = 1 chain.
inline Trace run_tempered(const Dataset& data, const Hyperparams& hp, const TemperingOptions& options = {}) {
  if (!options.unchecked_schedule) hp.validate();
  const TemperingSchedule schedule = TemperingSchedule::from(hp);
  const std::size_t chains = schedule.temperatures.size();
  const auto ladder = schedule.ladder();
  const std::size_t cold = ladder.front();

  std::vector<detail::ChainSlot> slots;
  slots.reserve(chains);
  for (std::size_t k = 0; k < chains; ++k) {
    Rng rng = make_stream(hp.seed, k);
    ChainState state = init_state(data, hp, schedule.temperatures[k], rng);
    state.stream = k;
    slots.push_back({std::move(state), std::move(rng), hp.tau_prop, {}});
  }

  Trace trace;
  trace.hp = hp;
  trace.samples.reserve(static_cast<std::size_t>(hp.n_iter - hp.n_burn));
  for (std::size_t r = 0; r + 1 < ladder.size(); ++r) {
    trace.swaps.push_back({schedule.temperatures[ladder[r]], schedule.temperatures[ladder[r + 1]], 0, 0});
  }
  Rng swap_rng = make_stream(hp.seed, kSwapStream);
  const int workers = worker_count(options.threads, chains);

  int swap_event = 0;
  for (int iter = 0; iter < hp.n_iter; iter += schedule.swap_interval) {
    const int block = std::min(schedule.swap_interval, hp.n_iter - iter);
    auto run_range = [&](int worker) {
      for (std::size_t k = static_cast<std::size_t>(worker); k < chains; k += static_cast<std::size_t>(workers)) {
        detail::advance_chain(slots[k], data, hp, iter, block, k == cold, &trace, options.keep_tau);
      }
    };
    if (workers == 1) {
      run_range(0);
    } else {
      std::vector<std::thread> pool;
      for (int w = 0; w < workers; ++w) pool.emplace_back(run_range, w);
      for (auto& t : pool) t.join();
    }

    if (chains > 1 && block == schedule.swap_interval) {
      const std::size_t start = static_cast<std::size_t>(swap_event % 2);
      for (std::size_t r = start; r + 1 < ladder.size(); r += 2) {
        auto& lo = slots[ladder[r]].state;
        auto& hi = slots[ladder[r + 1]].state;
        const double log_ratio = swap_log_ratio(lo, hi, data, hp);
        ++trace.swaps[r].attempts;
        if (std::log(uniform_open(swap_rng)) < log_ratio) {
          exchange_states(lo, hi);
          ++trace.swaps[r].accepts;
        }
      }
      ++swap_event;
    }
    if (options.progress) options.progress(iter + block, hp.n_iter);
  }

  const auto& kept = slots[cold].kept_b;
  trace.b_acceptance = kept.proposals == 0 ? 0.0 : static_cast<double>(kept.accepts) / kept.proposals;
  return trace;
}

}  // namespace dcgx
