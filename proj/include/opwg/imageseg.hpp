#pragma once

// Color segmentation by streaming clustering of L*a*b* pixel values. Rows are
// fed in groups (4 by default, like reading a sensor a few lines at a time),
// then every pixel is labelled with the final model. Pixels are converted
// again for labelling instead of being cached during streaming.

#include <Eigen/Core>

#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "opwg/error.hpp"
#include "opwg/image.hpp"
#include "opwg/lab.hpp"
#include "opwg/lambda_bound.hpp"
#include "opwg/stream.hpp"

namespace opwg {

using Rgb = std::array<std::uint8_t, 3>;

struct LabelMap {
    int width = 0;
    int height = 0;
    std::vector<int> labels;  // row-major
    int k = 0;
    std::vector<Rgb> palette;
};

struct SegmentConfig {
    OpwgConfig opwg;
    int rows_per_batch = 4;

    // K_max 25 and diagonal covariances in both phases; online lambda 0.03,
    // offline lambda chosen from {0.006, 0.005, 0.004}. Both lambdas may exceed
    // their bound here, which is reported as a warning rather than an error.
    static SegmentConfig defaults() {
        SegmentConfig c;
        c.opwg.online.k_max = 25;
        c.opwg.online.lambda = 0.03;
        c.opwg.online.covariance_kind = CovarianceKind::Diagonal;
        c.opwg.online.enforce_lambda_bound = false;
        c.opwg.offline = c.opwg.online;
        c.opwg.offline.lambda = 0.005;
        c.opwg.offline_lambda_grid = {0.006, 0.005, 0.004};
        return c;
    }
};

struct SegmentResult {
    LabelMap map;
    FinalizeResult final_fit;
    std::vector<std::size_t> pixel_counts;  // per cluster
    std::size_t batches = 0;
    std::size_t prototypes = 0;
    std::vector<std::string> warnings;
};

// Distinct hues by golden-angle rotation.
inline Rgb palette_color(int k) {
    const double hue = std::fmod(k * 137.50776405, 360.0) / 60.0;
    const double s = 0.7, v = 0.95;
    const double c = v * s;
    const double x = c * (1.0 - std::abs(std::fmod(hue, 2.0) - 1.0));
    double r = 0, g = 0, b = 0;
    switch (static_cast<int>(hue)) {
        case 0: r = c; g = x; break;
        case 1: r = x; g = c; break;
        case 2: g = c; b = x; break;
        case 3: g = x; b = c; break;
        case 4: r = x; b = c; break;
        default: r = c; b = x; break;
    }
    const double m = v - c;
    auto to8 = [m](double t) { return static_cast<std::uint8_t>(std::lround(255.0 * (t + m))); };
    return {to8(r), to8(g), to8(b)};
}

namespace detail {

inline Eigen::MatrixXd lab_rows(const ImagePlane& image, int row_begin, int row_end) {
    Eigen::MatrixXd pts(3, static_cast<Eigen::Index>(row_end - row_begin) * image.width);
    Eigen::Index col = 0;
    for (int y = row_begin; y < row_end; ++y) {
        for (int x = 0; x < image.width; ++x, ++col) {
            const std::uint8_t* p = image.pixel(x, y);
            const Lab lab = srgb_to_lab(p[0], p[1], p[2]);
            pts(0, col) = lab.L;
            pts(1, col) = lab.a;
            pts(2, col) = lab.b;
        }
    }
    return pts;
}

inline void note_bound(const PwgConfig& c, double lambda, const char* phase, std::vector<std::string>& warnings) {
    const double bound = lambda_bound(c.k_max, 3, c.covariance_kind);
    if (lambda >= bound)
        warnings.push_back(std::string(phase) + " lambda=" + std::to_string(lambda) + " exceeds the bound " +
                           std::to_string(bound) + "; proceeding");
}

}  // namespace detail

inline SegmentResult segment(const ImagePlane& image, const SegmentConfig& config) {
    if (image.empty()) throw InvalidArgument("segment: empty image");
    if (config.rows_per_batch < 1) throw InvalidArgument("segment: rows_per_batch must be >= 1");

    SegmentResult out;
    detail::note_bound(config.opwg.online, config.opwg.online.lambda, "online", out.warnings);
    if (config.opwg.offline_lambda_grid.empty()) {
        detail::note_bound(config.opwg.offline, config.opwg.offline.lambda, "offline", out.warnings);
    } else {
        for (double l : config.opwg.offline_lambda_grid) detail::note_bound(config.opwg.offline, l, "offline", out.warnings);
    }

    Stream stream(config.opwg);
    for (int y = 0; y < image.height; y += config.rows_per_batch) {
        Batch batch;
        batch.index = out.batches++;
        batch.points = detail::lab_rows(image, y, std::min(image.height, y + config.rows_per_batch));
        stream.process_batch(batch);
    }
    for (const auto& d : stream.diagnostics()) out.warnings.push_back(d);
    out.prototypes = stream.prototypes().size();

    out.final_fit = stream.finalize();
    const Predictor predictor = out.final_fit.predictor();
    out.map.width = image.width;
    out.map.height = image.height;
    out.map.k = out.final_fit.fit.k();
    out.map.labels.reserve(image.pixel_count());
    for (int y = 0; y < image.height; y += config.rows_per_batch) {
        const auto labels = predictor.labels(detail::lab_rows(image, y, std::min(image.height, y + config.rows_per_batch)));
        out.map.labels.insert(out.map.labels.end(), labels.begin(), labels.end());
    }
    out.pixel_counts.assign(static_cast<std::size_t>(out.map.k), 0);
    for (int l : out.map.labels) ++out.pixel_counts[static_cast<std::size_t>(l)];
    for (int k = 0; k < out.map.k; ++k) out.map.palette.push_back(palette_color(k));
    return out;
}

inline ImagePlane render_palette(const LabelMap& map) {
    ImagePlane img(map.width, map.height);
    for (std::size_t i = 0; i < map.labels.size(); ++i) {
        const Rgb& c = map.palette[static_cast<std::size_t>(map.labels[i])];
        std::copy(c.begin(), c.end(), img.rgb.begin() + static_cast<std::ptrdiff_t>(3 * i));
    }
    return img;
}

// Each pixel painted with the mean RGB of its cluster.
inline ImagePlane render_mean_color(const LabelMap& map, const ImagePlane& source) {
    std::vector<std::array<double, 3>> sums(static_cast<std::size_t>(map.k), {0.0, 0.0, 0.0});
    std::vector<std::size_t> counts(static_cast<std::size_t>(map.k), 0);
    for (std::size_t i = 0; i < map.labels.size(); ++i) {
        const auto l = static_cast<std::size_t>(map.labels[i]);
        for (int c = 0; c < 3; ++c) sums[l][static_cast<std::size_t>(c)] += source.rgb[3 * i + static_cast<std::size_t>(c)];
        ++counts[l];
    }
    ImagePlane img(map.width, map.height);
    for (std::size_t i = 0; i < map.labels.size(); ++i) {
        const auto l = static_cast<std::size_t>(map.labels[i]);
        for (int c = 0; c < 3; ++c)
            img.rgb[3 * i + static_cast<std::size_t>(c)] =
                static_cast<std::uint8_t>(std::lround(sums[l][static_cast<std::size_t>(c)] / static_cast<double>(counts[l])));
    }
    return img;
}

}  // namespace opwg
