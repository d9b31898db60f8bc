#pragma once

#include <Eigen/Dense>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "ctpe/csv.hpp"
#include "ctpe/model.hpp"
#include "ctpe/rng.hpp"
#include "ctpe/time_grid.hpp"

namespace ctpe {

enum class Split { train, val, test };

inline std::string to_string(Split s) {
    switch (s) {
        case Split::train: return "train";
        case Split::val: return "val";
        case Split::test: return "test";
    }
    return "?";
}

/// Raised when a simulated state leaves the finite range; carries the episode
/// and step indices so model blow-ups are attributable.
struct SimulationBlowup : std::runtime_error {
    int episode;
    int grid_step;
    SimulationBlowup(int ep, int step)
        : std::runtime_error("simulation blow-up: non-finite state at episode " +
                             std::to_string(ep) + ", grid step " + std::to_string(step)),
          episode(ep),
          grid_step(step) {}
};

/// M logged episodes sampled on the grid, stored row-major as [m][n][dim].
struct TrajectoryBatch {
    TimeGrid grid;
    int episodes = 0;
    int dim = 0;
    Split split = Split::train;
    std::uint64_t seed = 0;
    std::optional<ControllerPerturbation> perturbation;
    std::vector<double> data;

    Eigen::Map<const Vec> state(int m, int n) const {
        return Eigen::Map<const Vec>(data.data() + (static_cast<std::size_t>(m) * (grid.count + 1) + n) * dim, dim);
    }
    Eigen::Map<Vec> state(int m, int n) {
        return Eigen::Map<Vec>(data.data() + (static_cast<std::size_t>(m) * (grid.count + 1) + n) * dim, dim);
    }
};

namespace detail {

/// One Euler-Maruyama leg from (s, t0) over `grid_steps * substeps` internal
/// steps of size dt/substeps, calling `record` after each grid step.
template <class Record>
void euler_maruyama_leg(const DiffusionModel& model, Vec s, double t0, double dt,
                        int grid_steps, int substeps, RngStream& rng, int episode,
                        int first_grid_index, Record&& record) {
    const double h = dt / substeps;
    const double sqrt_h = std::sqrt(h);
    Vec noise(model.noise_dim);
    for (int k = 0; k < grid_steps; ++k) {
        for (int sub = 0; sub < substeps; ++sub) {
            const double t = t0 + k * dt + sub * h;
            for (int j = 0; j < model.noise_dim; ++j) noise[j] = rng.gauss();
            s += model.drift(s, t) * h + model.sigma(s, t) * (sqrt_h * noise);
            if (!s.allFinite()) throw SimulationBlowup(episode, first_grid_index + k + 1);
        }
        record(first_grid_index + k + 1, s);
    }
}

}  // namespace detail

/// Simulates M closed-loop episodes on the grid. Per-episode RNG substreams
/// are derived by hashing (seed, split, episode), so the batch is reproduced
/// bit-exactly by any schedule.
inline TrajectoryBatch simulate(const DiffusionModel& model, const TimeGrid& grid, int episodes,
                                std::uint64_t seed, int substeps = 16,
                                Split split = Split::train) {
    if (episodes < 1) throw std::invalid_argument("simulate: episodes must be >= 1");
    if (substeps < 1) throw std::invalid_argument("simulate: substeps must be >= 1");
    TrajectoryBatch batch;
    batch.grid = grid;
    batch.episodes = episodes;
    batch.dim = model.dim;
    batch.split = split;
    batch.seed = seed;
    batch.data.assign(static_cast<std::size_t>(episodes) * (grid.count + 1) * model.dim, 0.0);

    for (int m = 0; m < episodes; ++m) {
        RngStream rng(seed, to_string(split), static_cast<std::uint64_t>(m));
        Vec s = model.start.sample(rng);
        if (s.size() != model.dim) throw std::invalid_argument("simulate: start dimension mismatch");
        batch.state(m, 0) = s;
        detail::euler_maruyama_leg(model, s, 0.0, grid.dt, grid.count, substeps, rng, m, 0,
                                   [&](int n, const Vec& x) { batch.state(m, n) = x; });
    }
    return batch;
}

/// Discounted left-Riemann return along episode m from grid index n:
///   sum_{k=n}^{N_T-1} e^{-beta (t_k - t_n)} r(s_k, t_k) dt
///   + e^{-beta (T - t_n)} h(s_{N_T}).
inline double realized_return(const TrajectoryBatch& batch, int m, int n,
                              const DiffusionModel& model) {
    if (m < 0 || m >= batch.episodes || n < 0 || n > batch.grid.count) {
        throw std::out_of_range("realized_return: index out of range");
    }
    const double beta = model.discount;
    const double tn = batch.grid.time(n);
    double acc = 0.0;
    for (int k = n; k < batch.grid.count; ++k) {
        const double tk = batch.grid.time(k);
        acc += std::exp(-beta * (tk - tn)) * model.reward(batch.state(m, k), tk) * batch.grid.dt;
    }
    acc += std::exp(-beta * (batch.grid.horizon - tn)) * model.terminal(batch.state(m, batch.grid.count));
    return acc;
}

/// Returns the full (episodes x (N_T+1)) table of realized returns via the
/// exact backward recursion; used by the bandwidth selector.
inline Mat realized_return_table(const TrajectoryBatch& batch, const DiffusionModel& model) {
    const int nt = batch.grid.count;
    Mat table(batch.episodes, nt + 1);
    const double decay = std::exp(-model.discount * batch.grid.dt);
    for (int m = 0; m < batch.episodes; ++m) {
        table(m, nt) = model.terminal(batch.state(m, nt));
        for (int n = nt - 1; n >= 0; --n) {
            table(m, n) = model.reward(batch.state(m, n), batch.grid.time(n)) * batch.grid.dt +
                          decay * table(m, n + 1);
        }
    }
    return table;
}

/// Columnar CSV of a batch: header lines carry the grid and provenance,
/// then one row per (episode, n) with columns episode,n,s_1..s_d.
inline void save_batch_csv(const TrajectoryBatch& batch, const std::string& path) {
    std::ostringstream out;
    out << "# trajectory batch\n";
    out << "# horizon=" << fmt_double(batch.grid.horizon) << " dt=" << fmt_double(batch.grid.dt)
        << " count=" << batch.grid.count << " episodes=" << batch.episodes
        << " dim=" << batch.dim << " split=" << to_string(batch.split) << " seed=" << batch.seed
        << "\n";
    out << "episode,n";
    for (int j = 1; j <= batch.dim; ++j) out << ",s_" << j;
    out << "\n";
    for (int m = 0; m < batch.episodes; ++m) {
        for (int n = 0; n <= batch.grid.count; ++n) {
            out << m << ',' << n;
            auto s = batch.state(m, n);
            for (int j = 0; j < batch.dim; ++j) out << ',' << fmt_double(s[j]);
            out << "\n";
        }
    }
    write_text_file(path, out.str());
}

}  // namespace ctpe
