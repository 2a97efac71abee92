#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "vefl/common.hpp"

namespace vefl::fl {

struct ZeroSuccessProbability : std::domain_error {
    using std::domain_error::domain_error;
};
struct ZeroSelectionProbability : std::domain_error {
    using std::domain_error::domain_error;
};
struct DegenerateWeights : std::domain_error {
    using std::domain_error::domain_error;
};

// Flat parameter vector; multinomial logistic weights W[k][f] plus bias per
// class, stored row-major class-by-class.
struct ModelParams {
    Vec values;

    int dim() const { return static_cast<int>(values.size()); }
};

struct ClientDataset {
    Mat features;            // n_samples x n_features
    std::vector<int> labels;
    double bits = 0.0;       // D_v, the bit volume the SLA reports

    int size() const { return static_cast<int>(labels.size()); }
};

struct LearningConfig {
    double prox_mu = 1.0;          // mu
    double step_size = 0.0;        // delta; 0 means auto (0.1 / L-hat)
    double dissimilarity_b = 1.0;  // B
    double lipschitz_l = 1.0;      // L
    double hessian_sigma = 0.0;    // sigma
    double inexactness_gamma = 0.5;  // gamma in [0,1]
    int n_classes = 10;

    double mu_prime() const { return prox_mu - hessian_sigma; }
    bool valid() const {
        return prox_mu > hessian_sigma && hessian_sigma >= 0 && inexactness_gamma >= 0 &&
               inexactness_gamma <= 1 && step_size >= 0 && n_classes >= 2;
    }
};

struct AggregationInputs {
    Vec weights;                   // p_v, sums to 1
    std::vector<bool> success;     // delivery indicator
    std::vector<bool> selected;    // membership indicator
    Vec success_prob;              // p_v^suc
    Vec selection_prob;            // q_v
    double lambda = 0.0;           // sojourn/data mixing
};

// Synthetic Gaussian-blob classification pool (one blob per class).
struct DataPool {
    Mat features;
    std::vector<int> labels;
    int n_classes = 0;
};

DataPool make_blob_pool(int n_samples, int n_features, int n_classes, double spread, Rng& rng);

// Splits each label's samples across CVs by a symmetric Dir(alpha) draw;
// degenerate draws are resampled so every CV keeps at least one sample.
std::vector<ClientDataset> partition_dirichlet(const DataPool& pool, double alpha, int n_cvs,
                                               Rng& rng);

// Proximal local loss: softmax cross-entropy plus (mu/2)||w - anchor||^2.
double local_objective(const ModelParams& model, const ModelParams& anchor,
                       const ClientDataset& data, const LearningConfig& cfg, Vec* grad);

// Full-batch gradient descent from the anchor for the given iteration count.
ModelParams local_train(const ModelParams& anchor, const ClientDataset& data,
                        const LearningConfig& cfg, int iters);

Vec aggregation_weights(const std::vector<double>& dataset_bits,
                        const std::vector<double>& sojourn_bounds, double lambda);

ModelParams aggregate_fdpc(const ModelParams& anchor, const std::vector<ModelParams>& locals,
                           const AggregationInputs& agg);
ModelParams aggregate_pdpc(const ModelParams& anchor, const std::vector<ModelParams>& locals,
                           const AggregationInputs& agg);

double theorem1_bound(const AggregationInputs& agg, double grad_norm, const LearningConfig& cfg);

// Power-iteration bound on the softmax-loss Hessian spectral norm.
double estimate_lipschitz(const ClientDataset& data, const LearningConfig& cfg, Rng& rng);

double test_accuracy(const ModelParams& model, const DataPool& test, int n_classes);

void save_checkpoint(const std::string& path, const ModelParams& model, int fpp_bits);
ModelParams load_checkpoint(const std::string& path, int* fpp_bits = nullptr);

}  // namespace vefl::fl
