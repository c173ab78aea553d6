#include "cbir/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace cbir {

void LabelMap::validate() const {
    if (values.size() != static_cast<std::size_t>(h) * w)
        throw ContractError("label map storage has wrong size");
    const int max_id = category_count(category_set);
    for (int v : values)
        if (v < 0 || v > max_id)
            throw ContractError("label map id outside declared category set");
}

void ProbMap::validate() const {
    if (values.size() != static_cast<std::size_t>(s) * h * w)
        throw ContractError("prob map storage has wrong size");
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            double sum = 0.0;
            for (int c = 0; c < s; ++c) sum += at(c, y, x);
            if (std::fabs(sum - 1.0) > 1e-6)
                throw ContractError("prob map pixel not normalized");
        }
    }
}

double dice(const std::vector<std::uint8_t>& a,
            const std::vector<std::uint8_t>& b) {
    if (a.size() != b.size()) throw ContractError("dice: shape mismatch");
    long na = 0, nb = 0, overlap = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i]) ++na;
        if (b[i]) ++nb;
        if (a[i] && b[i]) ++overlap;
    }
    if (na + nb == 0) return 1.0;
    return 2.0 * overlap / static_cast<double>(na + nb);
}

double mean_category_dice(const LabelMap& a, const LabelMap& b) {
    if (a.h != b.h || a.w != b.w)
        throw ContractError("mean_category_dice: shape mismatch");
    if (a.category_set != b.category_set)
        throw ContractError("mean_category_dice: category set mismatch");
    std::set<int> categories;
    for (int v : a.values)
        if (v != 0) categories.insert(v);
    for (int v : b.values)
        if (v != 0) categories.insert(v);
    if (categories.empty()) return 1.0;  // degenerate: agreement on absence

    double total = 0.0;
    for (int c : categories) {
        long na = 0, nb = 0, overlap = 0;
        for (std::size_t i = 0; i < a.values.size(); ++i) {
            bool ia = a.values[i] == c;
            bool ib = b.values[i] == c;
            if (ia) ++na;
            if (ib) ++nb;
            if (ia && ib) ++overlap;
        }
        total += 2.0 * overlap / static_cast<double>(na + nb);
    }
    return total / static_cast<double>(categories.size());
}

double generalized_dice_loss(const LabelMap& pred, const LabelMap& gt) {
    if (pred.h != gt.h || pred.w != gt.w)
        throw ContractError("generalized_dice_loss: shape mismatch");
    std::set<int> categories;
    for (int v : gt.values)
        if (v != 0) categories.insert(v);
    if (categories.empty())
        throw ContractError("generalized_dice_loss: ground truth is all background");

    double num = 0.0, den = 0.0;
    for (int c : categories) {
        long np = 0, ng = 0, overlap = 0;
        for (std::size_t i = 0; i < gt.values.size(); ++i) {
            bool ip = pred.values[i] == c;
            bool ig = gt.values[i] == c;
            if (ip) ++np;
            if (ig) ++ng;
            if (ip && ig) ++overlap;
        }
        double w = 1.0 / (static_cast<double>(ng) * ng);
        num += w * overlap;
        den += w * (np + ng);
    }
    return 1.0 - 2.0 * num / den;
}

double focal_loss(const ProbMap& prob, const LabelMap& gt, double gamma,
                  double clamp) {
    if (prob.h != gt.h || prob.w != gt.w)
        throw ContractError("focal_loss: shape mismatch");
    const double n = static_cast<double>(gt.h) * gt.w;
    double total = 0.0;
    for (int y = 0; y < gt.h; ++y) {
        for (int x = 0; x < gt.w; ++x) {
            int c = gt.at(y, x);
            if (c < 0 || c >= prob.s)
                throw ContractError("focal_loss: label outside class range");
            double p = std::clamp(prob.at(c, y, x), clamp, 1.0);
            total += -std::pow(1.0 - p, gamma) * std::log(p);
        }
    }
    return total / n;
}

double jaccard(std::vector<int> a, std::vector<int> b) {
    std::sort(a.begin(), a.end());
    a.erase(std::unique(a.begin(), a.end()), a.end());
    std::sort(b.begin(), b.end());
    b.erase(std::unique(b.begin(), b.end()), b.end());
    if (a.empty() && b.empty()) return 1.0;
    std::vector<int> inter;
    std::set_intersection(a.begin(), a.end(), b.begin(), b.end(),
                          std::back_inserter(inter));
    std::size_t uni = a.size() + b.size() - inter.size();
    return static_cast<double>(inter.size()) / static_cast<double>(uni);
}

}  // namespace cbir
