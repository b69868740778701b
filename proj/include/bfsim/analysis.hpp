#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "bfsim/errors.hpp"
#include "bfsim/params.hpp"

// Probability that a successful brute-forcer recovered the victim's own key
// (so no colliding public key exists), plus empirical checks of it.
//
// With N ~ Bin(N_sec, 1/N_addr) preimages per address and n0 = k N_sec / N_addr:
//
//   eps < Pr[N <= n0] + 1/n0 < (N_addr/N_sec) / (1-k)^2 + (N_addr/N_sec) / k
//
// The coefficient f(k) = 1/(1-k)^2 + 1/k is minimised near k = 0.361.
namespace bfsim::analysis {

class ParamsTooLarge : public ParamsError {
public:
    using ParamsError::ParamsError;
};

struct EpsilonBound {
    long double k = 0;
    long double n0 = 0;
    long double term_cdf = 0;  // bound on Pr[N <= n0]
    long double term_inv = 0;  // 1 / n0
    long double bound = 0;     // term_cdf + term_inv
    ModelParams params;
};

/// f(k) = 1/(1-k)^2 + 1/k.
long double bound_coefficient(long double k);

/// Throws ParamsError unless 0 < k < 1.
EpsilonBound epsilon_bound(const ModelParams& params, long double k);

/// The binomial-CDF bound before simplification:
/// (N_sec - k N_sec/N_addr) / (N_addr (N_sec/N_addr (1-k))^2).
long double cdf_bound_unsimplified(const ModelParams& params, long double k);

struct KOptimum {
    long double k = 0;
    long double coefficient = 0;  // f(k)
    long double bound = 0;        // f(k) * N_addr / N_sec
};

/// 1e-4 grid scan, then golden-section refinement to 1e-6.
KOptimum optimize_k(const ModelParams& params);

/// Mean over all 2^secret_bits keys of 1/|preimages of the key's address|.
/// Throws ParamsTooLarge when secret_bits > 20.
long double epsilon_exact(const ModelParams& params, unsigned workers = 1);

/// Preimage count for every address value over the full key space.
/// Throws ParamsTooLarge when secret_bits > 20.
std::vector<std::uint32_t> enumerate_preimage_counts(const ModelParams& params, unsigned workers = 1);

struct PreimageStats {
    std::uint64_t sample_size = 0;
    std::vector<std::uint64_t> counts;  // indexed by address value
    double mean = 0;
    double variance = 0;  // unbiased, across addresses
    double expected_mean = 0;
    double binomial_variance = 0;
};

/// Moments of per-address counts across `counts`, for a sample of `sample_size` keys.
PreimageStats summarize_counts(std::vector<std::uint64_t> counts, std::uint64_t sample_size, int address_bits);

/// Address histogram of `sample_keys` uniformly random keys.
/// Throws ParamsError when address_bits > 24 (dense histogram).
PreimageStats preimage_distribution(const ModelParams& params, std::uint64_t sample_keys, std::uint64_t seed);

/// "address,count" rows with a header line.
std::string histogram_csv(const PreimageStats& stats);

struct EvidenceTrials {
    std::uint64_t evidence_ok = 0;
    std::uint64_t same_key = 0;
};

/// Per trial: draw a victim key, search uniformly random keys until one maps
/// to the victim's address, and record whether it is the victim's key.
/// Trials run in batches that share one search stream; results depend only
/// on (params, trials, seed). Throws ParamsError when trials == 0.
EvidenceTrials monte_carlo_evidence(const ModelParams& params, std::uint64_t trials, std::uint64_t seed,
                                    unsigned workers = 1);

}  // namespace bfsim::analysis
