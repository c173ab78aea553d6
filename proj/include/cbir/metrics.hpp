#pragma once

#include <vector>

#include "cbir/common.hpp"

namespace cbir {

enum class CategorySet { Normal6, Abnormal3 };

inline int category_count(CategorySet s) {
    return s == CategorySet::Normal6 ? 6 : 3;
}

// Category ids per pixel; 0 is background.
struct LabelMap {
    int h = 0;
    int w = 0;
    CategorySet category_set = CategorySet::Normal6;
    std::vector<int> values;  // h*w, row-major

    int size() const { return h * w; }
    int at(int y, int x) const { return values[static_cast<std::size_t>(y) * w + x]; }
    void validate() const;
};

// Per-pixel class probabilities, normalized over s within 1e-6.
struct ProbMap {
    int s = 0;
    int h = 0;
    int w = 0;
    std::vector<double> values;  // s*h*w

    double at(int cls, int y, int x) const {
        return values[(static_cast<std::size_t>(cls) * h + y) * w + x];
    }
    void validate() const;
};

// 2|a∩b| / (|a|+|b|); both masks empty counts as perfect agreement.
double dice(const std::vector<std::uint8_t>& a,
            const std::vector<std::uint8_t>& b);

// Dice averaged over category ids present in either map; categories
// empty in both are excluded. Two all-background maps give 1.0.
double mean_category_dice(const LabelMap& a, const LabelMap& b);

// Generalized Dice loss with per-category weights 1/|gt_s|^2; categories
// absent from gt get zero weight. All-background gt is an error.
double generalized_dice_loss(const LabelMap& pred, const LabelMap& gt);

// Mean focal loss over pixels; probabilities clamped to [clamp, 1].
double focal_loss(const ProbMap& prob, const LabelMap& gt,
                  double gamma = 2.0, double clamp = 1e-7);

// |a∩b| / |a∪b| over index sets; both empty gives 1.0.
double jaccard(std::vector<int> a, std::vector<int> b);

}  // namespace cbir
