#include "cbir/synth.hpp"

#include <cmath>
#include <numbers>
#include <random>

namespace cbir {

void SynthConfig::validate() const {
    if (volumes < 1 || slices_per_volume < 1 || grid_h < 1 || grid_w < 1 ||
        label_h < 1 || label_w < 1 || k < 2 || d < 1 || epochs < 1)
        throw ContractError("synth config: all sizes must be positive");
    if (lesion_rate < 0.0 || lesion_rate > 1.0)
        throw ContractError("synth config: lesion_rate must be in [0,1]");
    if (label_h < grid_h || label_w < grid_w)
        throw ContractError("synth config: label dims must be >= grid dims");
    // One-hot pooling needs one feature channel per category plus background.
    if (d < 7)
        throw ContractError("synth config: d must be >= 7");
}

FeatureGrid features_for_labels(const LabelMap& labels, int grid_h, int grid_w,
                                int d, std::uint64_t seed) {
    const int channels = category_count(labels.category_set) + 1;
    if (d < channels)
        throw ContractError("features_for_labels: d smaller than label channels");
    FeatureGrid grid;
    grid.grid_h = grid_h;
    grid.grid_w = grid_w;
    grid.d = d;
    grid.values.assign(static_cast<std::size_t>(grid_h) * grid_w * d, 0.0);

    for (int gy = 0; gy < grid_h; ++gy) {
        int y0 = gy * labels.h / grid_h;
        int y1 = (gy + 1) * labels.h / grid_h;
        for (int gx = 0; gx < grid_w; ++gx) {
            int x0 = gx * labels.w / grid_w;
            int x1 = (gx + 1) * labels.w / grid_w;
            auto cell = grid.cell(gy * grid_w + gx);
            double denom = static_cast<double>(y1 - y0) * (x1 - x0);
            for (int y = y0; y < y1; ++y)
                for (int x = x0; x < x1; ++x) cell[labels.at(y, x)] += 1.0;
            for (int c = 0; c < channels; ++c) cell[c] *= 3.0 / denom;
        }
    }

    // Noise keyed by label content only: identical label maps produce
    // identical features regardless of volume or slice.
    std::uint64_t content =
        fnv1a(labels.values.data(), labels.values.size() * sizeof(int));
    std::mt19937_64 rng(mix_seed(seed, content));
    std::normal_distribution<double> noise(0.0, 0.05);
    for (double& v : grid.values) v += noise(rng);
    return grid;
}

namespace {

struct LesionBlob {
    double cx, cy;          // center at the middle slice, pixels
    double dx, dy;          // per-slice drift
    double radius;          // base radius, pixels
    double slice_center;    // slice of maximum extent
    double slice_halfwidth;
};

struct VolumeShape {
    double cx, cy, dcx, dcy;    // ellipse center and per-slice drift
    double ax, ay;              // semi-axes
    double theta, dtheta;       // sector rotation and per-slice drift
    bool has_lesion = false;
    std::vector<LesionBlob> blobs;
};

VolumeShape make_volume_shape(const SynthConfig& cfg, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    auto uni = [&](double lo, double hi) {
        return std::uniform_real_distribution<double>(lo, hi)(rng);
    };
    VolumeShape s;
    const double w = cfg.label_w;
    const double h = cfg.label_h;
    s.cx = uni(0.44, 0.56) * w;
    s.cy = uni(0.44, 0.56) * h;
    s.dcx = uni(-0.10, 0.10) * w / cfg.slices_per_volume;
    s.dcy = uni(-0.10, 0.10) * h / cfg.slices_per_volume;
    s.ax = uni(0.28, 0.40) * w;
    s.ay = uni(0.28, 0.40) * h;
    s.theta = uni(0.0, 2.0 * std::numbers::pi);
    s.dtheta = uni(-0.04, 0.04);
    s.has_lesion = uni(0.0, 1.0) < cfg.lesion_rate;
    if (s.has_lesion) {
        int n_blobs = std::uniform_int_distribution<int>(1, 3)(rng);
        for (int b = 0; b < n_blobs; ++b) {
            LesionBlob blob;
            double rr = uni(0.0, 0.55);
            double phi = uni(0.0, 2.0 * std::numbers::pi);
            blob.cx = s.cx + rr * s.ax * std::cos(phi);
            blob.cy = s.cy + rr * s.ay * std::sin(phi);
            blob.dx = uni(-0.06, 0.06) * w / cfg.slices_per_volume;
            blob.dy = uni(-0.06, 0.06) * h / cfg.slices_per_volume;
            blob.radius = uni(0.10, 0.20) * std::min(w, h);
            blob.slice_center = uni(0.2, 0.8) * cfg.slices_per_volume;
            blob.slice_halfwidth = uni(0.3, 0.6) * cfg.slices_per_volume;
            s.blobs.push_back(blob);
        }
    }
    return s;
}

// Cross-section scale across slices, ellipsoid-like with floor.
double slice_scale(int slice, int slices) {
    double mid = 0.5 * (slices - 1);
    double t = mid > 0.0 ? (slice - mid) / (mid + 1.0) : 0.0;
    return std::sqrt(std::max(0.2, 1.0 - t * t));
}

LabelMap paint_normal(const SynthConfig& cfg, const VolumeShape& vs,
                      int slice) {
    LabelMap map;
    map.h = cfg.label_h;
    map.w = cfg.label_w;
    map.category_set = CategorySet::Normal6;
    map.values.assign(static_cast<std::size_t>(map.h) * map.w, 0);

    double sc = slice_scale(slice, cfg.slices_per_volume);
    double cx = vs.cx + vs.dcx * slice;
    double cy = vs.cy + vs.dcy * slice;
    double ax = vs.ax * sc;
    double ay = vs.ay * sc;
    double theta = vs.theta + vs.dtheta * slice;

    for (int y = 0; y < map.h; ++y) {
        for (int x = 0; x < map.w; ++x) {
            double u = (x - cx) / ax;
            double v = (y - cy) / ay;
            double rr = std::sqrt(u * u + v * v);
            if (rr >= 1.0) continue;
            double phi = std::atan2(v, u) - theta;
            phi = std::fmod(phi, 2.0 * std::numbers::pi);
            if (phi < 0.0) phi += 2.0 * std::numbers::pi;
            int sector = std::min(2, static_cast<int>(
                                         phi / (2.0 * std::numbers::pi / 3.0)));
            int ring = rr < 0.55 ? 0 : 1;
            map.values[static_cast<std::size_t>(y) * map.w + x] =
                1 + ring * 3 + sector;
        }
    }
    return map;
}

LabelMap paint_abnormal(const SynthConfig& cfg, const VolumeShape& vs,
                        int slice) {
    LabelMap map;
    map.h = cfg.label_h;
    map.w = cfg.label_w;
    map.category_set = CategorySet::Abnormal3;
    map.values.assign(static_cast<std::size_t>(map.h) * map.w, 0);
    if (!vs.has_lesion) return map;

    for (const LesionBlob& blob : vs.blobs) {
        double t = (slice - blob.slice_center) / blob.slice_halfwidth;
        double r = blob.radius * std::max(0.0, 1.0 - t * t);
        if (r < 1.5) continue;
        double cx = blob.cx + blob.dx * slice;
        double cy = blob.cy + blob.dy * slice;
        // Nested edema / enhancing / core rings, inner overwrites outer.
        for (int y = 0; y < map.h; ++y) {
            for (int x = 0; x < map.w; ++x) {
                double d2 = (x - cx) * (x - cx) + (y - cy) * (y - cy);
                int label = 0;
                if (d2 < r * r * 0.11) label = 3;        // core (0.33 r)
                else if (d2 < r * r * 0.44) label = 2;   // enhancing (0.66 r)
                else if (d2 < r * r) label = 1;          // edema
                if (label > 0)
                    map.values[static_cast<std::size_t>(y) * map.w + x] = label;
            }
        }
    }
    return map;
}

}  // namespace

SynthDataset generate(const SynthConfig& config) {
    config.validate();

    std::vector<VolumeShape> shapes(config.volumes);
    std::vector<std::vector<CodeRecord>> by_volume(config.volumes);
    parallel_for(0, config.volumes, config.jobs, [&](int v) {
        VolumeShape vs = make_volume_shape(config, mix_seed(config.seed, v));
        auto& records = by_volume[v];
        records.resize(config.slices_per_volume);
        char vid[16];
        std::snprintf(vid, sizeof(vid), "v%03d", v);
        for (int s = 0; s < config.slices_per_volume; ++s) {
            CodeRecord& r = records[s];
            r.volume_id = vid;
            r.slice_index = s;
            r.normal_labels = paint_normal(config, vs, s);
            r.abnormal_labels = paint_abnormal(config, vs, s);
        }
    });

    SynthDataset out;
    for (auto& v : by_volume)
        for (auto& r : v) out.records.push_back(std::move(r));

    // Feature grids for codebook learning; noise seeds are separated per
    // stream so the two codebooks are independent.
    const std::uint64_t normal_noise_seed = mix_seed(config.seed, 0x4e4f524d);
    const std::uint64_t abnormal_noise_seed = mix_seed(config.seed, 0x41424e4d);
    const int n = static_cast<int>(out.records.size());
    std::vector<FeatureGrid> normal_feats(n), abnormal_feats(n);
    parallel_for(0, n, config.jobs, [&](int i) {
        normal_feats[i] =
            features_for_labels(out.records[i].normal_labels, config.grid_h,
                                config.grid_w, config.d, normal_noise_seed);
        abnormal_feats[i] =
            features_for_labels(out.records[i].abnormal_labels, config.grid_h,
                                config.grid_w, config.d, abnormal_noise_seed);
    });

    auto collect = [&](const std::vector<FeatureGrid>& feats) {
        std::vector<double> all;
        all.reserve(static_cast<std::size_t>(n) * config.grid_h *
                    config.grid_w * config.d);
        for (const FeatureGrid& g : feats)
            all.insert(all.end(), g.values.begin(), g.values.end());
        return all;
    };
    out.normal_cb =
        learn_codebook(collect(normal_feats), config.d, config.k, config.epochs,
                       mix_seed(config.seed, 0x1001), Stream::Normal);
    out.abnormal_cb =
        learn_codebook(collect(abnormal_feats), config.d, config.k,
                       config.epochs, mix_seed(config.seed, 0x1002),
                       Stream::Abnormal);

    parallel_for(0, n, config.jobs, [&](int i) {
        out.records[i].normal_code =
            quantize(normal_feats[i], out.normal_cb).code;
        out.records[i].abnormal_code =
            quantize(abnormal_feats[i], out.abnormal_cb).code;
    });
    return out;
}

long area_of(const CodeRecord& record, Stream stream) {
    const LabelMap& map =
        stream == Stream::Normal ? record.normal_labels : record.abnormal_labels;
    long n = 0;
    for (int v : map.values)
        if (v != 0) ++n;
    return n;
}

}  // namespace cbir
