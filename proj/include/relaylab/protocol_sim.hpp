#pragma once

// Monte Carlo simulation of the relay-assisted HARQ protocol at the
// mutual-information level: quasi-static channel draws, timer-based relay
// selection, per-round accumulation and outage counting.
//
// Relay indices are 0-based throughout.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <queue>
#include <string>
#include <utility>
#include <vector>

#include "relaylab/errors.hpp"
#include "relaylab/fading_stats.hpp"
#include "relaylab/harq_analysis.hpp"
#include "relaylab/parallel.hpp"
#include "relaylab/rng.hpp"

namespace relaylab {

enum class Combining { Alamouti, Beamforming };

inline const char* to_string(Combining c) { return c == Combining::Alamouti ? "alamouti" : "beamforming"; }

inline std::optional<Combining> parse_combining(const std::string& s)
{
    if (s == "alamouti") return Combining::Alamouti;
    if (s == "beamforming") return Combining::Beamforming;
    return std::nullopt;
}

struct ChannelRealization {
    double gain_f0 = 0.0;
    std::vector<double> gain_f;
    std::vector<double> gain_g;

    std::size_t n_relays() const noexcept { return gain_f.size(); }

    void validate() const
    {
        if (gain_f.size() != gain_g.size()) {
            throw DomainError("ChannelRealization: gain_f and gain_g lengths differ");
        }
        auto ok = [](double v) { return std::isfinite(v) && v >= 0.0; };
        bool good = ok(gain_f0);
        for (std::size_t i = 0; i < gain_f.size(); ++i) good = good && ok(gain_f[i]) && ok(gain_g[i]);
        if (!good) throw DomainError("ChannelRealization: gains must be finite and >= 0");
    }

    double min_gain(std::size_t i) const { return std::min(gain_f[i], gain_g[i]); }
};

struct PacketTrace {
    /// Empty only when the realization has no relays.
    std::optional<std::size_t> selected_relay;
    /// Round after which the selected relay has decoded; L + 1 if never.
    int chi = 0;
    /// First round with accumulated information >= R; L + 1 on outage.
    int dest_decode_round = 0;
    /// Accumulated information after each round actually transmitted.
    std::vector<double> info_rounds;
    Combining combining = Combining::Alamouti;
    /// True when round 1 failed, so the relay selection phase ran.
    bool relay_engaged = false;

    bool in_outage_after(int l) const { return dest_decode_round > l; }
};

/// Gains are drawn in the order f0, then (f_i, g_i) for each relay.
inline ChannelRealization draw_realization(const NetworkProfile& p, RngStream& s)
{
    ChannelRealization c;
    const std::size_t n = p.n_relays();
    c.gain_f.resize(n);
    c.gain_g.resize(n);
    c.gain_f0 = s.exponential(p.sigma2_f0);
    for (std::size_t i = 0; i < n; ++i) {
        c.gain_f[i] = s.exponential(p.sigma2_f[i]);
        c.gain_g[i] = s.exponential(p.sigma2_g[i]);
    }
    return c;
}

inline ChannelRealization draw_realization(const NetworkProfile& p, std::uint64_t seed, std::uint64_t trial_index)
{
    RngStream s(seed, trial_index);
    return draw_realization(p, s);
}

/// argmax_i min(gain_f[i], gain_g[i]); ties go to the lowest index.
inline std::size_t select_relay_centralized(const ChannelRealization& c)
{
    if (c.n_relays() == 0) throw DomainError("select_relay_centralized: no relays");
    std::size_t best = 0;
    double best_gain = c.min_gain(0);
    for (std::size_t i = 1; i < c.n_relays(); ++i) {
        const double g = c.min_gain(i);
        if (g > best_gain) {
            best = i;
            best_gain = g;
        }
    }
    return best;
}

struct SelectionOutcome {
    std::size_t relay = 0;
    double elapsed = 0.0;
};

/// Every relay starts a timer timer_scale / min(gain_f, gain_g). The first to
/// expire broadcasts a flag packet and the remaining relays back off.
inline SelectionOutcome select_relay_distributed(const ChannelRealization& c, double timer_scale)
{
    if (c.n_relays() == 0) throw DomainError("select_relay_distributed: no relays");
    if (!(timer_scale > 0.0) || !std::isfinite(timer_scale)) {
        throw DomainError("select_relay_distributed: timer_scale must be positive");
    }
    using Event = std::pair<double, std::size_t>;
    std::priority_queue<Event, std::vector<Event>, std::greater<>> timers;
    for (std::size_t i = 0; i < c.n_relays(); ++i) {
        const double m = c.min_gain(i);
        if (!(m > 0.0)) {
            throw DegenerateChannel("select_relay_distributed: relay " + std::to_string(i) +
                                    " has zero min-gain, its timer never expires");
        }
        timers.emplace(timer_scale / m, i);
    }
    const auto [t, winner] = timers.top();
    timers.pop();
    // Flag packet at time t silences everyone still counting down.
    while (!timers.empty()) timers.pop();
    return SelectionOutcome{winner, t};
}

/// Mutual information of one HARQ round at the destination.
inline double round_mutual_info(const ChannelRealization& c, std::size_t r, bool relay_active, const LinkBudget& b,
                                Combining combining)
{
    if (!relay_active) return std::log2(1.0 + b.rho * c.gain_f0);
    if (r >= c.n_relays()) throw IndexError("round_mutual_info: relay index out of range");
    if (combining == Combining::Alamouti) {
        return std::log2(1.0 + b.rho * c.gain_f0 + b.rho * c.gain_g[r]);
    }
    const double amp = std::sqrt(c.gain_f0) + std::sqrt(c.gain_g[r]);
    return std::log2(1.0 + b.rho * amp * amp);
}

/// Relay decode round: first k in [1, L] with k * I_fr >= R, else L + 1.
inline int relay_decode_round(double gain_fr, const LinkBudget& b)
{
    const double info = std::log2(1.0 + b.rho * gain_fr);
    for (int k = 1; k <= b.max_rounds; ++k) {
        if (k * info >= b.rate) return k;
    }
    return b.max_rounds + 1;
}

/// One packet. A realization with no relays runs plain point-to-point HARQ.
inline PacketTrace run_packet(const ChannelRealization& c, const LinkBudget& b, Combining combining)
{
    const int L = b.max_rounds;
    PacketTrace t;
    t.combining = combining;
    t.chi = L + 1;
    double help_info = 0.0;
    if (c.n_relays() > 0) {
        const std::size_t r = select_relay_centralized(c);
        t.selected_relay = r;
        t.chi = relay_decode_round(c.gain_f[r], b);
        help_info = round_mutual_info(c, r, true, b, combining);
    }
    const double direct_info = round_mutual_info(c, 0, false, b, combining);
    t.info_rounds.reserve(static_cast<std::size_t>(L));
    double acc = 0.0;
    t.dest_decode_round = L + 1;
    for (int l = 1; l <= L; ++l) {
        acc += (t.selected_relay && t.chi < l) ? help_info : direct_info;
        t.info_rounds.push_back(acc);
        if (acc >= b.rate) {
            t.dest_decode_round = l;
            break;
        }
    }
    t.relay_engaged = t.selected_relay.has_value() && t.dest_decode_round > 1;
    return t;
}

struct SimulationCounts {
    std::uint64_t trials = 0;
    /// undecoded[l] = packets still undecoded after round l, l = 0..L.
    std::vector<std::uint64_t> undecoded;
    /// chi_hist[k] = packets whose relay decoded after round k, k = 1..L+1.
    std::vector<std::uint64_t> chi_hist;

    SimulationCounts& operator+=(const SimulationCounts& o)
    {
        trials += o.trials;
        for (std::size_t i = 0; i < undecoded.size(); ++i) undecoded[i] += o.undecoded[i];
        for (std::size_t i = 0; i < chi_hist.size(); ++i) chi_hist[i] += o.chi_hist[i];
        return *this;
    }
};

struct OutageEstimate {
    double p_hat = 0.0;
    double ci3 = 0.0;
    std::uint64_t failures = 0;
    std::uint64_t trials = 0;
};

inline constexpr std::uint64_t kMinTrials = 1000;
inline constexpr std::uint64_t kTrialsPerBlock = 1u << 15;

inline OutageEstimate make_estimate(std::uint64_t failures, std::uint64_t trials)
{
    const double n = static_cast<double>(trials);
    const double p = static_cast<double>(failures) / n;
    return OutageEstimate{p, 3.0 * std::sqrt(p * (1.0 - p) / n), failures, trials};
}

namespace detail {

template <class PerBlock, class Acc>
Acc reduce_blocks(std::uint64_t trials, unsigned workers, Acc zero, PerBlock&& per_block)
{
    const std::size_t n_blocks = static_cast<std::size_t>((trials + kTrialsPerBlock - 1) / kTrialsPerBlock);
    std::vector<Acc> partial(n_blocks, zero);
    parallel_for(n_blocks, worker_count(workers), [&](std::size_t blk) {
        const std::uint64_t begin = blk * kTrialsPerBlock;
        const std::uint64_t end = std::min(trials, begin + kTrialsPerBlock);
        per_block(begin, end, partial[blk]);
    });
    Acc total = zero;
    for (const auto& p : partial) total += p;
    return total;
}

} // namespace detail

/// Simulates `trials` packets and counts outages after every round at once.
/// Trial i always uses stream (seed, i), so counts do not depend on workers.
inline SimulationCounts simulate_counts(const LinkBudget& b, const NetworkProfile& p, Combining combining,
                                        std::uint64_t trials, std::uint64_t seed, unsigned workers = 0)
{
    b.validate();
    p.validate();
    if (trials < kMinTrials) {
        throw ConfigError("simulation needs at least " + std::to_string(kMinTrials) + " trials");
    }
    const auto L = static_cast<std::size_t>(b.max_rounds);
    SimulationCounts zero{0, std::vector<std::uint64_t>(L + 1, 0), std::vector<std::uint64_t>(L + 2, 0)};
    return detail::reduce_blocks(trials, workers, zero, [&](std::uint64_t begin, std::uint64_t end, SimulationCounts& acc) {
        for (std::uint64_t i = begin; i < end; ++i) {
            RngStream s(seed, i);
            const auto c = draw_realization(p, s);
            const auto t = run_packet(c, b, combining);
            ++acc.trials;
            for (int l = 0; l < t.dest_decode_round && l <= b.max_rounds; ++l) {
                ++acc.undecoded[static_cast<std::size_t>(l)];
            }
            ++acc.chi_hist[static_cast<std::size_t>(t.chi)];
        }
    });
}

inline OutageEstimate estimate_outage(const SimulationCounts& counts, int l)
{
    if (l < 1 || static_cast<std::size_t>(l) >= counts.undecoded.size()) {
        throw IndexError("estimate_outage: l must lie in [1, L]");
    }
    return make_estimate(counts.undecoded[static_cast<std::size_t>(l)], counts.trials);
}

inline OutageEstimate estimate_outage(int l, const LinkBudget& b, const NetworkProfile& p, Combining combining,
                                      std::uint64_t trials, std::uint64_t seed, unsigned workers = 0)
{
    if (l < 1 || l > b.max_rounds) throw IndexError("estimate_outage: l must lie in [1, L]");
    return estimate_outage(simulate_counts(b, p, combining, trials, seed, workers), l);
}

/// Gains of the selected relay's two hops over `trials` draws.
struct SelectedGainSamples {
    std::vector<double> source_hop; ///< gamma_{f_r}
    std::vector<double> dest_hop;   ///< gamma_{g_r}
};

inline SelectedGainSamples sample_selected_gains(const NetworkProfile& p, std::uint64_t trials, std::uint64_t seed,
                                                 unsigned workers = 0)
{
    p.require_relays();
    SelectedGainSamples out;
    out.source_hop.resize(trials);
    out.dest_hop.resize(trials);
    const std::size_t n_blocks = static_cast<std::size_t>((trials + kTrialsPerBlock - 1) / kTrialsPerBlock);
    parallel_for(n_blocks, worker_count(workers), [&](std::size_t blk) {
        const std::uint64_t begin = blk * kTrialsPerBlock;
        const std::uint64_t end = std::min(trials, begin + kTrialsPerBlock);
        for (std::uint64_t i = begin; i < end; ++i) {
            const auto c = draw_realization(p, seed, i);
            const std::size_t r = select_relay_centralized(c);
            out.source_hop[i] = c.gain_f[r];
            out.dest_hop[i] = c.gain_g[r];
        }
    });
    return out;
}

struct Histogram {
    double lower = 0.0;
    double width = 0.0;
    std::vector<std::uint64_t> counts;
    std::uint64_t overflow = 0;
    std::uint64_t total = 0;

    double bin_center(std::size_t i) const { return lower + (static_cast<double>(i) + 0.5) * width; }
    double mass(std::size_t i) const { return static_cast<double>(counts[i]) / static_cast<double>(total); }
    double density(std::size_t i) const { return mass(i) / width; }
    double overflow_mass() const { return static_cast<double>(overflow) / static_cast<double>(total); }
};

/// Histogram of samples on [0, upper]; samples above upper land in the
/// overflow bin so that bin masses plus overflow mass sum to 1.
inline Histogram make_histogram(const std::vector<double>& samples, std::size_t bins, double upper)
{
    if (bins == 0) throw ConfigError("histogram: bins must be positive");
    if (!(upper > 0.0) || !std::isfinite(upper)) throw ConfigError("histogram: upper edge must be positive");
    Histogram h;
    h.width = upper / static_cast<double>(bins);
    h.counts.assign(bins, 0);
    h.total = samples.size();
    for (double x : samples) {
        if (x > upper) {
            ++h.overflow;
            continue;
        }
        const auto idx = std::min(bins - 1, static_cast<std::size_t>(x / h.width));
        ++h.counts[idx];
    }
    return h;
}

/// Normalized histogram of the selected relay's source-hop gain. With
/// upper <= 0 the range extends to the largest sample (no overflow).
inline Histogram empirical_selected_pdf(const NetworkProfile& p, std::uint64_t trials, std::size_t bins,
                                        std::uint64_t seed, double upper = 0.0, unsigned workers = 0)
{
    if (trials < 100000) throw ConfigError("empirical_selected_pdf needs at least 1e5 trials");
    const auto samples = sample_selected_gains(p, trials, seed, workers).source_hop;
    if (upper <= 0.0) upper = *std::max_element(samples.begin(), samples.end());
    return make_histogram(samples, bins, upper);
}

} // namespace relaylab
