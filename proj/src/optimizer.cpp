#include "nvmag/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>

#include "nvmag/error.hpp"
#include "nvmag/parallel.hpp"
#include "nvmag/rng.hpp"

namespace nvmag {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

double wrap_phase(double phi) {
    phi = std::fmod(phi, kTwoPi);
    return phi < 0.0 ? phi + kTwoPi : phi;
}

WaveformGenome random_genome(const WaveformGenome& templ, Rng& rng) {
    std::uniform_real_distribution<double> amp(0.0, templ.amp_max);
    std::uniform_real_distribution<double> phase(0.0, kTwoPi);
    WaveformGenome g = templ;
    for (double& a : g.amp_plus) a = amp(rng);
    for (double& a : g.amp_minus) a = amp(rng);
    for (double& p : g.phase_plus) p = phase(rng);
    for (double& p : g.phase_minus) p = phase(rng);
    return g;
}

std::size_t tournament(const std::vector<double>& scores, std::size_t size, Rng& rng) {
    std::uniform_int_distribution<std::size_t> pick(0, scores.size() - 1);
    std::size_t best = pick(rng);
    for (std::size_t k = 1; k < size; ++k) {
        const std::size_t c = pick(rng);
        if (scores[c] > scores[best] || (scores[c] == scores[best] && c < best)) best = c;
    }
    return best;
}

WaveformGenome breed(const WaveformGenome& a, const WaveformGenome& b, const GaConfig& cfg, Rng& rng) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> kick(0.0, 1.0);
    WaveformGenome child = a;
    const bool cross = unit(rng) < cfg.crossover_rate;
    auto genes = [&](std::vector<double>& c, const std::vector<double>& other, bool is_phase) {
        for (std::size_t i = 0; i < c.size(); ++i) {
            if (cross && unit(rng) < 0.5) c[i] = other[i];
            if (unit(rng) < cfg.gene_mutation_rate) {
                if (is_phase) {
                    c[i] = wrap_phase(c[i] + cfg.mutation_std * kTwoPi * kick(rng));
                } else {
                    c[i] = std::clamp(c[i] + cfg.mutation_std * a.amp_max * kick(rng), 0.0, a.amp_max);
                }
            }
        }
    };
    genes(child.amp_plus, b.amp_plus, false);
    genes(child.amp_minus, b.amp_minus, false);
    genes(child.phase_plus, b.phase_plus, true);
    genes(child.phase_minus, b.phase_minus, true);
    return child;
}

}  // namespace

std::string_view to_string(Objective o) {
    return o == Objective::slope ? "slope" : "slope_per_root_time";
}

std::optional<Objective> parse_objective(std::string_view text) {
    if (text == "slope") return Objective::slope;
    if (text == "slope_per_root_time") return Objective::slope_per_root_time;
    return std::nullopt;
}

void GaConfig::validate() const {
    if (population_size < 1) throw InvalidInput("population_size must be at least 1");
    if (generations < 1) throw InvalidInput("generations must be at least 1");
    if (elite_count < 1 || elite_count > population_size)
        throw InvalidInput("elite_count must lie in [1, population_size]");
    if (tournament_size < 1) throw InvalidInput("tournament_size must be at least 1");
    if (!(mutation_std >= 0.0) || !std::isfinite(mutation_std)) throw InvalidInput("mutation_std must be non-negative");
    if (!(gene_mutation_rate >= 0.0 && gene_mutation_rate <= 1.0))
        throw InvalidInput("gene_mutation_rate must lie in [0, 1]");
    if (!(crossover_rate >= 0.0 && crossover_rate <= 1.0)) throw InvalidInput("crossover_rate must lie in [0, 1]");
    if (!(delta_b > 0.0) || !std::isfinite(delta_b)) throw InvalidInput("delta_b must be positive");
}

double minus_population(const WaveformGenome& genome, const FitnessContext& fc, double field) {
    DriveSchedule s = waveform_schedule(genome, fc.raman_detuning, fc.raman_detuning);
    ShotConditions shot = reference_shot(fc.ctx);
    shot.env.b_z += field;
    s.level_shifts = environment_level_shifts(fc.ctx, shot);
    Eigen::Vector3cd init = Eigen::Vector3cd::Zero();
    init(static_cast<Eigen::Index>(slot(Level::minus))) = std::polar(1.0, fc.initial_phase);
    return evolve(s, SpinState(init), fc.ctx.tol).population(Level::minus);
}

double fitness(const WaveformGenome& genome, const FitnessContext& fc, double delta_b) {
    if (!(delta_b > 0.0)) throw InvalidInput("delta_b must be positive");
    const double up = minus_population(genome, fc, fc.b0 + delta_b);
    const double down = minus_population(genome, fc, fc.b0 - delta_b);
    double score = std::abs(up - down) / (2.0 * delta_b);
    if (fc.objective == Objective::slope_per_root_time) score /= std::sqrt(genome.duration);
    return score;
}

double steepest_field(const WaveformGenome& genome, const FitnessContext& fc, double span, std::size_t points,
                      double delta_b) {
    if (!(span > 0.0) || points < 2) throw InvalidInput("steepest_field needs a positive span and two points");
    FitnessContext probe = fc;
    probe.objective = Objective::slope;
    double best_b = 0.0, best = -1.0;
    for (std::size_t i = 0; i < points; ++i) {
        probe.b0 = -span + 2.0 * span * static_cast<double>(i) / static_cast<double>(points - 1);
        const double f = fitness(genome, probe, delta_b);
        if (f > best) {
            best = f;
            best_b = probe.b0;
        }
    }
    return best_b;
}

GaResult evolve(const GaConfig& config, const WaveformGenome& templ, const FitnessContext& fc) {
    config.validate();
    templ.validate();
    const std::size_t n = config.population_size;

    std::vector<WaveformGenome> pop(n);
    pop[0] = templ;
    for (std::size_t i = 1; i < n; ++i) {
        Rng rng = make_stream(config.seed, "ga.init", i);
        pop[i] = random_genome(templ, rng);
    }
    std::vector<double> scores(n);
    parallel_for(n, config.threads, [&](std::size_t i) { scores[i] = fitness(pop[i], fc, config.delta_b); });

    auto ranking = [&] {
        std::vector<std::size_t> order(n);
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
        return order;
    };

    GaResult result;
    result.history.reserve(config.generations + 1);
    result.history.push_back(scores[ranking().front()]);

    for (std::size_t gen = 1; gen <= config.generations; ++gen) {
        const auto order = ranking();
        std::vector<WaveformGenome> next(n);
        std::vector<double> next_scores(n);
        for (std::size_t e = 0; e < config.elite_count; ++e) {
            next[e] = pop[order[e]];
            next_scores[e] = scores[order[e]];
        }
        for (std::size_t i = config.elite_count; i < n; ++i) {
            Rng rng = make_stream(config.seed, "ga.breed", gen * n + i);
            const std::size_t a = tournament(scores, config.tournament_size, rng);
            const std::size_t b = tournament(scores, config.tournament_size, rng);
            next[i] = breed(pop[a], pop[b], config, rng);
        }
        parallel_for(n - config.elite_count, config.threads, [&](std::size_t k) {
            const std::size_t i = config.elite_count + k;
            next_scores[i] = fitness(next[i], fc, config.delta_b);
        });
        pop = std::move(next);
        scores = std::move(next_scores);
        result.history.push_back(scores[ranking().front()]);
    }

    const std::size_t best = ranking().front();
    result.best = pop[best];
    result.best_fitness = scores[best];
    return result;
}

}  // namespace nvmag
