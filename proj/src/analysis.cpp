#include "bfsim/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <thread>
#include <unordered_map>

#include "bfsim/crypto.hpp"

namespace bfsim::analysis {

namespace {

constexpr int kMaxEnumerableBits = 20;
constexpr int kMaxDenseAddressBits = 24;

// N_addr / N_sec as an exact power of two.
long double space_ratio(const ModelParams& p) {
    return std::ldexp(1.0L, p.address_bits - p.secret_bits);
}

void check_enumerable(const ModelParams& params) {
    params.validate();
    if (params.secret_bits > kMaxEnumerableBits) {
        throw ParamsTooLarge("exact enumeration needs secret_bits <= 20, got " + std::to_string(params.secret_bits));
    }
}

template <typename Fn>
void parallel_for(unsigned workers, std::uint64_t n, Fn fn) {
    workers = std::max(1u, workers);
    std::vector<std::jthread> threads;
    for (unsigned w = 0; w < workers; ++w) {
        std::uint64_t lo = n * w / workers;
        std::uint64_t hi = n * (w + 1) / workers;
        threads.emplace_back([=, &fn] { fn(w, lo, hi); });
    }
}

}  // namespace

long double bound_coefficient(long double k) {
    return 1.0L / ((1.0L - k) * (1.0L - k)) + 1.0L / k;
}

EpsilonBound epsilon_bound(const ModelParams& params, long double k) {
    params.validate();
    if (!(k > 0.0L && k < 1.0L)) throw ParamsError("k must lie in (0, 1)");
    EpsilonBound b;
    b.params = params;
    b.k = k;
    const long double ratio = space_ratio(params);
    b.n0 = k / ratio;
    b.term_cdf = ratio / ((1.0L - k) * (1.0L - k));
    b.term_inv = 1.0L / b.n0;
    b.bound = b.term_cdf + b.term_inv;
    return b;
}

long double cdf_bound_unsimplified(const ModelParams& params, long double k) {
    params.validate();
    const long double n_sec = std::ldexp(1.0L, params.secret_bits);
    const long double n_addr = std::ldexp(1.0L, params.address_bits);
    const long double mean = n_sec / n_addr;
    const long double spread = mean * (1.0L - k);
    return (n_sec - k * mean) / (n_addr * spread * spread);
}

KOptimum optimize_k(const ModelParams& params) {
    params.validate();
    constexpr long double step = 1e-4L;
    long double best_k = step;
    long double best_f = bound_coefficient(best_k);
    for (int i = 2; i < 10000; ++i) {
        long double k = step * i;
        long double f = bound_coefficient(k);
        if (f < best_f) {
            best_f = f;
            best_k = k;
        }
    }

    const long double phi = (std::sqrt(5.0L) - 1.0L) / 2.0L;
    long double a = std::max(best_k - step, step / 2);
    long double b = std::min(best_k + step, 1.0L - step / 2);
    long double c = b - phi * (b - a);
    long double d = a + phi * (b - a);
    while (b - a > 1e-6L) {
        if (bound_coefficient(c) < bound_coefficient(d)) {
            b = d;
        } else {
            a = c;
        }
        c = b - phi * (b - a);
        d = a + phi * (b - a);
    }
    KOptimum out;
    out.k = (a + b) / 2;
    out.coefficient = bound_coefficient(out.k);
    out.bound = out.coefficient * space_ratio(params);
    return out;
}

std::vector<std::uint32_t> enumerate_preimage_counts(const ModelParams& params, unsigned workers) {
    check_enumerable(params);
    const std::uint64_t n_keys = std::uint64_t{1} << params.secret_bits;
    const std::uint64_t n_addr = std::uint64_t{1} << params.address_bits;
    std::vector<std::vector<std::uint32_t>> partial(std::max(1u, workers), std::vector<std::uint32_t>(n_addr, 0));
    parallel_for(workers, n_keys, [&](unsigned w, std::uint64_t lo, std::uint64_t hi) {
        auto& counts = partial[w];
        for (std::uint64_t v = lo; v < hi; ++v) {
            auto sk = crypto::SecretKey::from_u64(v, params);
            ++counts[crypto::address_of(sk, params).value()];
        }
    });
    std::vector<std::uint32_t> counts(n_addr, 0);
    for (const auto& p : partial) {
        for (std::uint64_t a = 0; a < n_addr; ++a) counts[a] += p[a];
    }
    return counts;
}

long double epsilon_exact(const ModelParams& params, unsigned workers) {
    auto counts = enumerate_preimage_counts(params, workers);
    // Each key of an address with c preimages contributes 1/c, so every
    // non-empty address contributes exactly 1 to the sum.
    long double sum = 0;
    for (auto c : counts) {
        for (std::uint32_t i = 0; i < c; ++i) sum += 1.0L / c;
    }
    return sum / std::ldexp(1.0L, params.secret_bits);
}

PreimageStats summarize_counts(std::vector<std::uint64_t> counts, std::uint64_t sample_size, int address_bits) {
    PreimageStats s;
    s.sample_size = sample_size;
    s.counts = std::move(counts);
    const double n = static_cast<double>(s.counts.size());
    double sum = 0;
    for (auto c : s.counts) sum += static_cast<double>(c);
    s.mean = sum / n;
    double sq = 0;
    for (auto c : s.counts) sq += (static_cast<double>(c) - s.mean) * (static_cast<double>(c) - s.mean);
    s.variance = s.counts.size() > 1 ? sq / (n - 1) : 0.0;
    const double p = std::ldexp(1.0, -address_bits);
    s.expected_mean = static_cast<double>(sample_size) * p;
    s.binomial_variance = static_cast<double>(sample_size) * p * (1 - p);
    return s;
}

PreimageStats preimage_distribution(const ModelParams& params, std::uint64_t sample_keys, std::uint64_t seed) {
    params.validate();
    if (params.address_bits > kMaxDenseAddressBits) throw ParamsError("histogram needs address_bits <= 24");
    std::vector<std::uint64_t> counts(std::size_t{1} << params.address_bits, 0);
    std::mt19937_64 rng(seed);
    for (std::uint64_t i = 0; i < sample_keys; ++i) {
        auto sk = crypto::random_key(rng, params);
        ++counts[crypto::address_of(sk, params).value()];
    }
    return summarize_counts(std::move(counts), sample_keys, params.address_bits);
}

std::string histogram_csv(const PreimageStats& stats) {
    std::string out = "address,count\n";
    for (std::size_t a = 0; a < stats.counts.size(); ++a) {
        out += std::to_string(a) + "," + std::to_string(stats.counts[a]) + "\n";
    }
    return out;
}

namespace {

EvidenceTrials run_batch(const ModelParams& params, std::uint64_t victims, std::uint64_t seed, std::uint64_t batch) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(batch), static_cast<std::uint32_t>(batch >> 32)};
    std::mt19937_64 rng(seq);

    std::vector<crypto::SecretKey> keys;
    keys.reserve(victims);
    std::unordered_map<crypto::AddressHash, std::vector<std::size_t>, crypto::AddressHashHasher> pending;
    for (std::uint64_t i = 0; i < victims; ++i) {
        keys.push_back(crypto::random_key(rng, params));
        pending[crypto::address_of(keys.back(), params)].push_back(keys.size() - 1);
    }

    EvidenceTrials out;
    while (!pending.empty()) {
        auto candidate = crypto::random_key(rng, params);
        auto it = pending.find(crypto::address_of(candidate, params));
        if (it == pending.end()) continue;
        for (auto idx : it->second) {
            if (keys[idx] == candidate) {
                ++out.same_key;
            } else {
                ++out.evidence_ok;
            }
        }
        pending.erase(it);
    }
    return out;
}

}  // namespace

EvidenceTrials monte_carlo_evidence(const ModelParams& params, std::uint64_t trials, std::uint64_t seed,
                                    unsigned workers) {
    params.validate();
    if (trials == 0) throw ParamsError("monte carlo needs at least one trial");
    // About one victim per 16 addresses per batch.
    std::uint64_t batch_size = params.address_bits >= 68 ? trials : (std::uint64_t{1} << params.address_bits) / 16;
    batch_size = std::clamp<std::uint64_t>(batch_size, 1, trials);
    const std::uint64_t n_batches = (trials + batch_size - 1) / batch_size;

    workers = std::max(1u, workers);
    std::vector<EvidenceTrials> partial(workers);
    parallel_for(workers, n_batches, [&](unsigned w, std::uint64_t lo, std::uint64_t hi) {
        for (std::uint64_t b = lo; b < hi; ++b) {
            std::uint64_t victims = std::min(batch_size, trials - b * batch_size);
            auto r = run_batch(params, victims, seed, b);
            partial[w].evidence_ok += r.evidence_ok;
            partial[w].same_key += r.same_key;
        }
    });
    EvidenceTrials total;
    for (const auto& p : partial) {
        total.evidence_ok += p.evidence_ok;
        total.same_key += p.same_key;
    }
    return total;
}

}  // namespace bfsim::analysis
