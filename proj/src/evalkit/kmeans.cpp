#include <algorithm>
#include <cmath>

#include "protovae/error.hpp"
#include "protovae/evalkit/evalkit.hpp"
#include "protovae/numgrad/kernels.hpp"

namespace protovae::evalkit {

namespace {

// Grows `centers` to `clusters` rows by D^2 sampling.
Tensor kmeanspp(const Tensor& X, std::size_t clusters, Rng& rng, const Tensor* seed_centers) {
    const std::size_t n = X.rows(), L = X.cols();
    const auto& kern = numgrad::kernels();
    Tensor centers({clusters, L});
    std::size_t have = 0;
    std::vector<double> d2(n, std::numeric_limits<double>::infinity());
    auto absorb = [&](std::size_t c) {
        for (std::size_t i = 0; i < n; ++i)
            d2[i] = std::min(d2[i], kern.squared_distance(L, X.data() + i * L, centers.data() + c * L));
    };
    if (seed_centers) {
        for (; have < seed_centers->rows(); ++have) {
            std::copy_n(seed_centers->data() + have * L, L, centers.data() + have * L);
            absorb(have);
        }
    }
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (; have < clusters; ++have) {
        double total = 0.0;
        if (have > 0)
            for (double v : d2) total += v;
        std::size_t pick = 0;
        if (total > 0.0) {
            double target = u(rng) * total;
            pick = n - 1;
            for (std::size_t i = 0; i < n; ++i) {
                if (d2[i] <= 0.0) continue;
                target -= d2[i];
                if (target < 0.0) {
                    pick = i;
                    break;
                }
            }
        } else {
            pick = std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
        }
        std::copy_n(X.data() + pick * L, L, centers.data() + have * L);
        absorb(have);
    }
    return centers;
}

double assign(const Tensor& X, const Tensor& centers, std::vector<std::size_t>& assignment) {
    const std::size_t n = X.rows(), L = X.cols(), k = centers.rows();
    const auto& kern = numgrad::kernels();
    assignment.resize(n);
    double sse = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double* x = X.data() + i * L;
        std::size_t best = 0;
        double best_d = kern.squared_distance(L, x, centers.data());
        for (std::size_t c = 1; c < k; ++c) {
            const double d = kern.squared_distance(L, x, centers.data() + c * L);
            if (d < best_d) {
                best_d = d;
                best = c;
            }
        }
        assignment[i] = best;
        sse += best_d;
    }
    return sse;
}

KMeansResult lloyd(const Tensor& X, Tensor centers, std::size_t max_iterations) {
    const std::size_t n = X.rows(), L = X.cols(), k = centers.rows();
    KMeansResult r;
    double sse = assign(X, centers, r.assignment);
    std::vector<std::size_t> next;
    std::vector<std::size_t> counts(k);
    for (std::size_t it = 0; it < max_iterations; ++it) {
        Tensor sums({k, L});
        std::fill(counts.begin(), counts.end(), 0);
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t c = r.assignment[i];
            ++counts[c];
            for (std::size_t l = 0; l < L; ++l) sums(c, l) += X(i, l);
        }
        for (std::size_t c = 0; c < k; ++c) {
            if (counts[c] == 0) continue;  // empty cluster keeps its center
            for (std::size_t l = 0; l < L; ++l) centers(c, l) = sums(c, l) / static_cast<double>(counts[c]);
        }
        const double next_sse = assign(X, centers, next);
        const bool stable = next == r.assignment;
        r.assignment.swap(next);
        sse = next_sse;
        if (stable) break;
    }
    r.centers = std::move(centers);
    r.loss = sse / static_cast<double>(n);
    return r;
}

}  // namespace

Tensor standardize(const Tensor& Z) {
    const std::size_t n = Z.rows(), L = Z.cols();
    if (n == 0) throw ContractError("standardize: empty set");
    Tensor out = Z;
    for (std::size_t l = 0; l < L; ++l) {
        double mean = 0.0;
        for (std::size_t i = 0; i < n; ++i) mean += Z(i, l);
        mean /= static_cast<double>(n);
        double var = 0.0;
        for (std::size_t i = 0; i < n; ++i) var += (Z(i, l) - mean) * (Z(i, l) - mean);
        const double sd = std::max(std::sqrt(var / static_cast<double>(n)), 1e-8);
        for (std::size_t i = 0; i < n; ++i) out(i, l) = (Z(i, l) - mean) / sd;
    }
    return out;
}

std::vector<std::size_t> assign_to_centers(const Tensor& X, const Tensor& centers) {
    if (X.cols() != centers.cols()) throw ShapeError("assign_to_centers: width mismatch");
    if (centers.rows() == 0) throw ContractError("assign_to_centers: no centers");
    std::vector<std::size_t> out;
    assign(X, centers, out);
    return out;
}

KMeansResult kmeans(const Tensor& X, std::size_t clusters, Rng& rng, const KMeansOptions& options,
                    const Tensor* warm_start) {
    const std::size_t n = X.rows();
    if (clusters == 0) throw ContractError("kmeans: clusters must be at least 1");
    if (clusters > n) {
        throw ContractError("kmeans: " + std::to_string(clusters) + " clusters for " + std::to_string(n) + " points");
    }
    if (options.restarts == 0) throw ContractError("kmeans: restarts must be at least 1");
    if (warm_start && (warm_start->cols() != X.cols() || warm_start->rows() > clusters)) {
        throw ShapeError("kmeans: warm-start centers do not fit");
    }
    KMeansResult best;
    best.loss = std::numeric_limits<double>::infinity();
    auto consider = [&best](KMeansResult r) {
        if (r.loss < best.loss) best = std::move(r);
    };
    if (warm_start && warm_start->rows() > 0) {
        consider(lloyd(X, kmeanspp(X, clusters, rng, warm_start), options.max_iterations));
    }
    for (std::size_t r = 0; r < options.restarts; ++r) {
        consider(lloyd(X, kmeanspp(X, clusters, rng, nullptr), options.max_iterations));
    }
    return best;
}

double kmeans_loss(const EmbeddingSet& emb, std::size_t clusters, std::uint64_t seed, const KMeansOptions& options) {
    Rng rng(seed);
    return kmeans(standardize(emb.Z), clusters, rng, options).loss;
}

std::vector<double> kmeans_loss_curve(const EmbeddingSet& emb, std::span<const std::size_t> clusters,
                                      std::uint64_t seed, const KMeansOptions& options) {
    for (std::size_t i = 1; i < clusters.size(); ++i) {
        if (clusters[i] <= clusters[i - 1]) throw ContractError("kmeans_loss_curve: cluster counts must ascend");
    }
    const Tensor X = standardize(emb.Z);
    Rng rng(seed);
    std::vector<double> out;
    Tensor previous;
    for (std::size_t c : clusters) {
        KMeansResult r = kmeans(X, c, rng, options, previous.empty() ? nullptr : &previous);
        out.push_back(r.loss);
        previous = std::move(r.centers);
    }
    return out;
}

}  // namespace protovae::evalkit
