#pragma once

#include <cstdint>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "acs/tensor.hpp"

namespace acs {

struct Sample {
    std::size_t id = 0;
    std::vector<double> features;
    int label = 0;
    ProbVector label_one_hot;
};

// In-memory training or evaluation set. Sample ids are contiguous from 0
// and double as indices into `samples`. noisy_ids records which labels
// were corrupted by inject_label_noise; it exists for measurement only
// and is never consulted by training or selection code.
struct Dataset {
    std::vector<Sample> samples;
    int num_classes = 0;
    std::set<std::size_t> noisy_ids;

    std::size_t size() const { return samples.size(); }
    std::size_t feature_dim() const {
        return samples.empty() ? 0 : samples[0].features.size();
    }

    // Feature matrix of the listed samples, one row per id.
    Tensor2 gather_features(const std::vector<std::size_t>& ids) const;
    // One-hot label matrix of the listed samples.
    Tensor2 gather_labels(const std::vector<std::size_t>& ids) const;
    std::vector<std::size_t> all_ids() const;

    void validate() const;
};

// Gaussian class blobs: per-class centers drawn once from a unit normal,
// samples scattered around them with the given spread.
struct SyntheticSpec {
    int classes = 2;
    int dims = 2;
    int per_class = 50;
    double spread = 0.1;
    std::uint64_t seed = 0;
};

Dataset make_synthetic(const SyntheticSpec& spec);

// IDX image/label file pair (the MNIST container format). Pixels are
// scaled to [0, 1].
Dataset load_idx(const std::string& images_path, const std::string& labels_path);

// CIFAR-10 binary batches: records of 1 label byte + 3072 pixel bytes.
Dataset load_cifar10(const std::vector<std::string>& batch_paths);

// Native serialized form; load(save(d)) round-trips bit-exactly.
void save_dataset(const Dataset& d, const std::string& path);
Dataset load_dataset_file(const std::string& path);

// Re-labels exactly round(rho * N) distinct samples, each to a class
// drawn uniformly from the other classes, and records their ids.
Dataset inject_label_noise(Dataset d, double rho, std::uint64_t seed);

// Fraction of the known-noisy ids that a pruning decision removed.
double noisy_recall(const std::vector<std::size_t>& pruned_ids,
                    const std::set<std::size_t>& noisy_ids);

// Seeded shuffle-and-cut holdout split. Both halves are re-indexed to
// contiguous ids.
std::pair<Dataset, Dataset> split_train_test(const Dataset& d,
                                             double test_fraction,
                                             std::uint64_t seed);

} // namespace acs
