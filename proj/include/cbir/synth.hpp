#pragma once

#include <cstdint>

#include "cbir/search.hpp"

namespace cbir {

// Desk-scale stand-in for a real MR dataset: label maps with smooth
// slice-to-slice drift and latent codes whose similarity correlates
// with label overlap.
struct SynthConfig {
    int volumes = 40;
    int slices_per_volume = 32;
    int grid_h = 8;
    int grid_w = 8;
    int label_h = 64;
    int label_w = 64;
    int k = 128;
    int d = 16;
    double lesion_rate = 0.7;
    int epochs = 10;
    std::uint64_t seed = 0;
    int jobs = 1;

    void validate() const;
};

struct SynthDataset {
    std::vector<CodeRecord> records;
    Codebook normal_cb;
    Codebook abnormal_cb;
};

// Average-pools the one-hot label map to grid resolution and adds noise
// seeded by the label content, so identical label maps always produce
// identical features.
FeatureGrid features_for_labels(const LabelMap& labels, int grid_h, int grid_w,
                                int d, std::uint64_t seed);

SynthDataset generate(const SynthConfig& config);

long area_of(const CodeRecord& record, Stream stream);

}  // namespace cbir
