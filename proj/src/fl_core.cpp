#include "vefl/fl_core.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <random>

namespace vefl::fl {

namespace {

// Row-major softmax logits for one sample: class k uses weights
// values[k*(F+1) .. k*(F+1)+F-1] and bias values[k*(F+1)+F].
void sample_logits(const Vec& w, const double* x, int n_features, int n_classes, Vec& out) {
    for (int k = 0; k < n_classes; ++k) {
        const double* wk = w.data() + static_cast<std::size_t>(k) * (n_features + 1);
        double z = wk[n_features];
        for (int f = 0; f < n_features; ++f) z += wk[f] * x[f];
        out[static_cast<std::size_t>(k)] = z;
    }
}

void softmax_inplace(Vec& z) {
    double zmax = *std::max_element(z.begin(), z.end());
    double sum = 0.0;
    for (auto& v : z) {
        v = std::exp(v - zmax);
        sum += v;
    }
    for (auto& v : z) v /= sum;
}

}  // namespace

DataPool make_blob_pool(int n_samples, int n_features, int n_classes, double spread, Rng& rng) {
    if (n_samples < n_classes || n_features < 1 || n_classes < 2)
        throw std::invalid_argument("make_blob_pool: degenerate shape");
    DataPool pool;
    pool.n_classes = n_classes;
    pool.features = Mat(n_samples, n_features);
    pool.labels.resize(static_cast<std::size_t>(n_samples));
    // Fixed, well-separated blob centers on a scaled hypercube corner pattern.
    Mat centers(n_classes, n_features);
    std::normal_distribution<double> center_draw(0.0, 1.0);
    for (int k = 0; k < n_classes; ++k)
        for (int f = 0; f < n_features; ++f) centers(k, f) = 3.0 * center_draw(rng);
    std::normal_distribution<double> noise(0.0, spread);
    for (int i = 0; i < n_samples; ++i) {
        int k = i % n_classes;  // balanced labels
        pool.labels[static_cast<std::size_t>(i)] = k;
        for (int f = 0; f < n_features; ++f) pool.features(i, f) = centers(k, f) + noise(rng);
    }
    return pool;
}

std::vector<ClientDataset> partition_dirichlet(const DataPool& pool, double alpha, int n_cvs,
                                               Rng& rng) {
    if (alpha <= 0 || n_cvs < 1) throw std::invalid_argument("partition_dirichlet: bad args");
    int n = static_cast<int>(pool.labels.size());
    std::vector<std::vector<int>> assigned(static_cast<std::size_t>(n_cvs));
    std::vector<std::vector<int>> by_label(static_cast<std::size_t>(pool.n_classes));
    for (int i = 0; i < n; ++i) by_label[static_cast<std::size_t>(pool.labels[i])].push_back(i);

    std::gamma_distribution<double> gamma(alpha, 1.0);
    for (auto& idx : by_label) {
        if (idx.empty()) continue;
        Vec share(static_cast<std::size_t>(n_cvs));
        double total = 0.0;
        do {  // resample fully degenerate draws
            total = 0.0;
            for (auto& s : share) {
                s = gamma(rng);
                total += s;
            }
        } while (total <= 0.0);
        // Largest-remainder apportionment of this label's samples.
        std::vector<int> counts(static_cast<std::size_t>(n_cvs));
        std::vector<std::pair<double, int>> rema;
        int used = 0;
        for (int v = 0; v < n_cvs; ++v) {
            double exact = share[static_cast<std::size_t>(v)] / total * idx.size();
            counts[static_cast<std::size_t>(v)] = static_cast<int>(std::floor(exact));
            used += counts[static_cast<std::size_t>(v)];
            rema.emplace_back(exact - std::floor(exact), v);
        }
        std::sort(rema.begin(), rema.end(), [](const auto& a, const auto& b) {
            return a.first != b.first ? a.first > b.first : a.second < b.second;
        });
        for (int r = 0; used < static_cast<int>(idx.size()); ++r, ++used)
            ++counts[static_cast<std::size_t>(rema[static_cast<std::size_t>(r)].second)];
        int cursor = 0;
        for (int v = 0; v < n_cvs; ++v)
            for (int c = 0; c < counts[static_cast<std::size_t>(v)]; ++c)
                assigned[static_cast<std::size_t>(v)].push_back(idx[static_cast<std::size_t>(cursor++)]);
    }

    // Guarantee every CV at least one sample: steal from the largest holder.
    for (int v = 0; v < n_cvs; ++v) {
        auto& mine = assigned[static_cast<std::size_t>(v)];
        if (!mine.empty()) continue;
        auto richest = std::max_element(assigned.begin(), assigned.end(),
                                        [](const auto& a, const auto& b) { return a.size() < b.size(); });
        if (richest->size() <= 1) throw std::invalid_argument("partition_dirichlet: pool too small");
        mine.push_back(richest->back());
        richest->pop_back();
    }

    std::vector<ClientDataset> out(static_cast<std::size_t>(n_cvs));
    int nf = static_cast<int>(pool.features.cols);
    for (int v = 0; v < n_cvs; ++v) {
        auto& idx = assigned[static_cast<std::size_t>(v)];
        std::sort(idx.begin(), idx.end());
        ClientDataset& d = out[static_cast<std::size_t>(v)];
        d.features = Mat(static_cast<int>(idx.size()), nf);
        d.labels.resize(idx.size());
        for (std::size_t i = 0; i < idx.size(); ++i) {
            d.labels[i] = pool.labels[static_cast<std::size_t>(idx[i])];
            for (int f = 0; f < nf; ++f) d.features(static_cast<int>(i), f) = pool.features(idx[i], f);
        }
        d.bits = static_cast<double>(idx.size()) * nf * 64.0;
    }
    return out;
}

double local_objective(const ModelParams& model, const ModelParams& anchor,
                       const ClientDataset& data, const LearningConfig& cfg, Vec* grad) {
    int nf = static_cast<int>(data.features.cols);
    int nc = cfg.n_classes;
    int dim = nc * (nf + 1);
    if (model.dim() != dim || anchor.dim() != dim)
        throw DimensionMismatch("local_objective: model dimension mismatch");
    int n = data.size();
    if (n < 1) throw std::invalid_argument("local_objective: empty dataset");

    if (grad) grad->assign(static_cast<std::size_t>(dim), 0.0);
    Vec probs(static_cast<std::size_t>(nc));
    double loss = 0.0;
    for (int i = 0; i < n; ++i) {
        const double* x = data.features.data.data() + static_cast<std::size_t>(i) * nf;
        sample_logits(model.values, x, nf, nc, probs);
        softmax_inplace(probs);
        double p = std::max(probs[static_cast<std::size_t>(data.labels[static_cast<std::size_t>(i)])],
                            1e-300);
        loss -= std::log(p);
        if (grad) {
            for (int k = 0; k < nc; ++k) {
                double delta = probs[static_cast<std::size_t>(k)] -
                               (k == data.labels[static_cast<std::size_t>(i)] ? 1.0 : 0.0);
                double* gk = grad->data() + static_cast<std::size_t>(k) * (nf + 1);
                for (int f = 0; f < nf; ++f) gk[f] += delta * x[f];
                gk[nf] += delta;
            }
        }
    }
    loss /= n;
    double prox = 0.0;
    for (int j = 0; j < dim; ++j) {
        double diff = model.values[static_cast<std::size_t>(j)] -
                      anchor.values[static_cast<std::size_t>(j)];
        prox += diff * diff;
        if (grad)
            (*grad)[static_cast<std::size_t>(j)] =
                (*grad)[static_cast<std::size_t>(j)] / n + cfg.prox_mu * diff;
    }
    return loss + 0.5 * cfg.prox_mu * prox;
}

ModelParams local_train(const ModelParams& anchor, const ClientDataset& data,
                        const LearningConfig& cfg, int iters) {
    if (iters < 0) throw std::invalid_argument("local_train: negative iterations");
    double step = cfg.step_size;
    if (step <= 0.0) {
        Rng rng = make_rng(0x5eedc0de, "lipschitz", static_cast<std::uint64_t>(data.size()),
                           static_cast<std::uint64_t>(anchor.dim()));
        step = 0.1 / std::max(estimate_lipschitz(data, cfg, rng) + cfg.prox_mu, 1e-12);
    }
    ModelParams w = anchor;
    Vec grad;
    for (int it = 0; it < iters; ++it) {
        local_objective(w, anchor, data, cfg, &grad);
        for (int j = 0; j < w.dim(); ++j)
            w.values[static_cast<std::size_t>(j)] -= step * grad[static_cast<std::size_t>(j)];
    }
    return w;
}

Vec aggregation_weights(const std::vector<double>& dataset_bits,
                        const std::vector<double>& sojourn_bounds, double lambda) {
    if (dataset_bits.empty() || dataset_bits.size() != sojourn_bounds.size())
        throw DimensionMismatch("aggregation_weights: size mismatch");
    if (lambda < 0 || lambda > 1) throw std::invalid_argument("aggregation_weights: lambda");
    double sum_d = std::accumulate(dataset_bits.begin(), dataset_bits.end(), 0.0);
    double sum_s = std::accumulate(sojourn_bounds.begin(), sojourn_bounds.end(), 0.0);
    if ((sum_d <= 0 && lambda < 1) || (sum_s <= 0 && lambda > 0))
        throw DegenerateWeights("aggregation_weights: zero normalizer");
    Vec p(dataset_bits.size());
    double total = 0.0;
    for (std::size_t v = 0; v < p.size(); ++v) {
        double data_part = sum_d > 0 ? dataset_bits[v] / sum_d : 0.0;
        double soj_part = sum_s > 0 ? sojourn_bounds[v] / sum_s : 0.0;
        p[v] = (1.0 - lambda) * data_part + lambda * soj_part;
        total += p[v];
    }
    if (total <= 0) throw DegenerateWeights("aggregation_weights: all-zero weights");
    for (auto& v : p) v /= total;
    return p;
}

ModelParams aggregate_fdpc(const ModelParams& anchor, const std::vector<ModelParams>& locals,
                           const AggregationInputs& agg) {
    ModelParams out = anchor;
    for (std::size_t v = 0; v < locals.size(); ++v) {
        if (!(agg.success_prob[v] > 0.0))
            throw ZeroSuccessProbability("aggregate_fdpc: p_suc must be positive");
        if (!agg.success[v]) continue;
        double coef = agg.weights[v] / agg.success_prob[v];
        for (int j = 0; j < out.dim(); ++j)
            out.values[static_cast<std::size_t>(j)] +=
                coef * (locals[v].values[static_cast<std::size_t>(j)] -
                        anchor.values[static_cast<std::size_t>(j)]);
    }
    return out;
}

ModelParams aggregate_pdpc(const ModelParams& anchor, const std::vector<ModelParams>& locals,
                           const AggregationInputs& agg) {
    ModelParams out = anchor;
    for (std::size_t v = 0; v < locals.size(); ++v) {
        if (!(agg.selection_prob[v] > 0.0))
            throw ZeroSelectionProbability("aggregate_pdpc: q must be positive");
        if (!(agg.success_prob[v] > 0.0))
            throw ZeroSuccessProbability("aggregate_pdpc: p_suc must be positive");
        if (!agg.selected[v] || !agg.success[v]) continue;
        double coef = agg.weights[v] / (agg.selection_prob[v] * agg.success_prob[v]);
        for (int j = 0; j < out.dim(); ++j)
            out.values[static_cast<std::size_t>(j)] +=
                coef * (locals[v].values[static_cast<std::size_t>(j)] -
                        anchor.values[static_cast<std::size_t>(j)]);
    }
    return out;
}

double theorem1_bound(const AggregationInputs& agg, double grad_norm, const LearningConfig& cfg) {
    double mu_p = cfg.mu_prime();
    if (mu_p <= 0) throw std::invalid_argument("theorem1_bound: mu' must be positive");
    double inv_sum = 0.0;
    for (std::size_t v = 0; v < agg.weights.size(); ++v) {
        if (!(agg.selection_prob[v] > 0 && agg.success_prob[v] > 0))
            throw std::invalid_argument("theorem1_bound: probabilities must be positive");
        inv_sum += agg.weights[v] / (agg.selection_prob[v] * agg.success_prob[v]);
    }
    double b1g = cfg.dissimilarity_b * (1.0 + cfg.inexactness_gamma);
    return (b1g / mu_p) * (1.0 + b1g * cfg.lipschitz_l / (2.0 * mu_p) * inv_sum) * grad_norm *
           grad_norm;
}

double estimate_lipschitz(const ClientDataset& data, const LearningConfig& cfg, Rng& rng) {
    // Softmax-loss Hessian is bounded by 0.5 * lambda_max((1/n) X^T X) with an
    // appended all-ones bias column; power iteration on the Gram operator.
    int nf = static_cast<int>(data.features.cols);
    int n = data.size();
    Vec v(static_cast<std::size_t>(nf) + 1);
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (auto& x : v) x = gauss(rng);
    double lambda = 0.0;
    Vec xv(static_cast<std::size_t>(n));
    for (int it = 0; it < 50; ++it) {
        for (int i = 0; i < n; ++i) {
            const double* row = data.features.data.data() + static_cast<std::size_t>(i) * nf;
            double s = v[static_cast<std::size_t>(nf)];
            for (int f = 0; f < nf; ++f) s += row[f] * v[static_cast<std::size_t>(f)];
            xv[static_cast<std::size_t>(i)] = s;
        }
        Vec next(v.size(), 0.0);
        for (int i = 0; i < n; ++i) {
            const double* row = data.features.data.data() + static_cast<std::size_t>(i) * nf;
            double s = xv[static_cast<std::size_t>(i)] / n;
            for (int f = 0; f < nf; ++f) next[static_cast<std::size_t>(f)] += s * row[f];
            next[static_cast<std::size_t>(nf)] += s;
        }
        double nn = norm2(next);
        if (nn <= 1e-300) return 0.5;
        lambda = nn;
        for (std::size_t j = 0; j < v.size(); ++j) v[j] = next[j] / nn;
    }
    (void)cfg;
    return 0.5 * lambda;
}

double test_accuracy(const ModelParams& model, const DataPool& test, int n_classes) {
    int nf = static_cast<int>(test.features.cols);
    Vec logits(static_cast<std::size_t>(n_classes));
    int hits = 0;
    int n = static_cast<int>(test.labels.size());
    for (int i = 0; i < n; ++i) {
        sample_logits(model.values, test.features.data.data() + static_cast<std::size_t>(i) * nf,
                      nf, n_classes, logits);
        int best = static_cast<int>(std::max_element(logits.begin(), logits.end()) - logits.begin());
        if (best == test.labels[static_cast<std::size_t>(i)]) ++hits;
    }
    return n > 0 ? static_cast<double>(hits) / n : 0.0;
}

void save_checkpoint(const std::string& path, const ModelParams& model, int fpp_bits) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("save_checkpoint: cannot open " + path);
    std::uint64_t dim = static_cast<std::uint64_t>(model.dim());
    std::uint64_t fpp = static_cast<std::uint64_t>(fpp_bits);
    out.write(reinterpret_cast<const char*>(&dim), sizeof dim);
    out.write(reinterpret_cast<const char*>(&fpp), sizeof fpp);
    out.write(reinterpret_cast<const char*>(model.values.data()),
              static_cast<std::streamsize>(model.values.size() * sizeof(double)));
    if (!out) throw std::runtime_error("save_checkpoint: write failed for " + path);
}

ModelParams load_checkpoint(const std::string& path, int* fpp_bits) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("load_checkpoint: cannot open " + path);
    std::uint64_t dim = 0, fpp = 0;
    in.read(reinterpret_cast<char*>(&dim), sizeof dim);
    in.read(reinterpret_cast<char*>(&fpp), sizeof fpp);
    ModelParams model;
    model.values.resize(dim);
    in.read(reinterpret_cast<char*>(model.values.data()),
            static_cast<std::streamsize>(dim * sizeof(double)));
    if (!in) throw std::runtime_error("load_checkpoint: truncated file " + path);
    if (fpp_bits) *fpp_bits = static_cast<int>(fpp);
    return model;
}

}  // namespace vefl::fl
