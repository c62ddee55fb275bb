#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <utility>
#include <vector>

#include "axb/matrix.hpp"
#include "axb/solver.hpp"

namespace axb {

/// RGB image with unit-range samples; values are clamped on construction so
/// load/store boundaries always hold the invariant.
struct ColorImage {
    size_t height = 0;
    size_t width = 0;
    std::array<std::vector<double>, 3> planes;  // row-major, planes[c][i*width + j]

    ColorImage() = default;
    ColorImage(size_t h, size_t w) : height(h), width(w) {
        for (auto& p : planes) p.assign(h * w, 0.0);
    }

    double& at(size_t c, size_t i, size_t j) { return planes[c][i * width + j]; }
    double at(size_t c, size_t i, size_t j) const { return planes[c][i * width + j]; }

    void clamp01() {
        for (auto& p : planes)
            for (double& v : p) v = std::clamp(v, 0.0, 1.0);
    }
};

/// mn×3 matrix whose column c is the column-stacked channel c.
struct ChannelStack {
    DenseMatrix X;
    size_t height = 0;
    size_t width = 0;
};

inline ChannelStack stack_channels(const ColorImage& img) {
    ChannelStack s;
    s.height = img.height;
    s.width = img.width;
    s.X = DenseMatrix(img.height * img.width, 3);
    for (size_t c = 0; c < 3; ++c)
        for (size_t j = 0; j < img.width; ++j)
            for (size_t i = 0; i < img.height; ++i)
                s.X(j * img.height + i, c) = img.at(c, i, j);
    return s;
}

inline ColorImage unstack_channels(const ChannelStack& s, bool clamp = true) {
    ColorImage img(s.height, s.width);
    for (size_t c = 0; c < 3; ++c)
        for (size_t j = 0; j < s.width; ++j)
            for (size_t i = 0; i < s.height; ++i)
                img.at(c, i, j) = s.X(j * s.height + i, c);
    if (clamp) img.clamp01();
    return img;
}

// ---------------------------------------------------------------------------
// Blur model

/// fspecial-style normalized Gaussian kernel on a centered odd grid.
inline DenseMatrix gaussian_kernel(size_t size, double sigma) {
    if (size % 2 == 0 || size < 1) throw ConfigError("kernel size must be odd and positive");
    if (!(sigma > 0.0)) throw ConfigError("kernel sigma must be positive");
    DenseMatrix k(size, size);
    const double c = (static_cast<double>(size) - 1.0) / 2.0;
    double total = 0.0;
    for (size_t i = 0; i < size; ++i)
        for (size_t j = 0; j < size; ++j) {
            const double dx = static_cast<double>(i) - c;
            const double dy = static_cast<double>(j) - c;
            k(i, j) = std::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma));
            total += k(i, j);
        }
    for (size_t i = 0; i < size; ++i)
        for (size_t j = 0; j < size; ++j) k(i, j) /= total;
    return k;
}

enum class Boundary { Zero };

/// Within-channel blur as an mn×mn CSR operator acting on column-stacked
/// channels. Zero boundary: kernel taps outside the image are dropped and
/// rows are not renormalized, so boundary rows sum below one. Kernels may be
/// rectangular as long as both extents are odd.
inline SparseMatrix build_blur_operator(size_t height, size_t width, const DenseMatrix& kernel,
                                        Boundary boundary = Boundary::Zero) {
    (void)boundary;
    if (kernel.rows() % 2 == 0 || kernel.cols() % 2 == 0)
        throw ConfigError("blur kernel extents must be odd");
    if (kernel.rows() > height || kernel.cols() > width)
        throw ConfigError("blur kernel larger than the image");
    const long long half_r = static_cast<long long>(kernel.rows()) / 2;
    const long long half_c = static_cast<long long>(kernel.cols()) / 2;
    const size_t pixels = height * width;
    std::vector<size_t> rp(pixels + 1, 0), ci;
    std::vector<double> vals;
    ci.reserve(pixels * kernel.rows() * kernel.cols());
    vals.reserve(pixels * kernel.rows() * kernel.cols());
    std::vector<std::pair<size_t, double>> entries;
    for (size_t j = 0; j < width; ++j) {
        for (size_t i = 0; i < height; ++i) {
            const size_t out_idx = j * height + i;
            entries.clear();
            for (long long du = -half_r; du <= half_r; ++du) {
                const long long si = static_cast<long long>(i) + du;
                if (si < 0 || si >= static_cast<long long>(height)) continue;
                for (long long dv = -half_c; dv <= half_c; ++dv) {
                    const long long sj = static_cast<long long>(j) + dv;
                    if (sj < 0 || sj >= static_cast<long long>(width)) continue;
                    const double w = kernel(static_cast<size_t>(du + half_r),
                                            static_cast<size_t>(dv + half_c));
                    if (w == 0.0) continue;
                    entries.emplace_back(static_cast<size_t>(sj) * height +
                                             static_cast<size_t>(si),
                                         w);
                }
            }
            std::sort(entries.begin(), entries.end());
            for (auto& [col, w] : entries) {
                ci.push_back(col);
                vals.push_back(w);
            }
            // out_idx advances sequentially in (j, i) order, matching row order
            rp[out_idx + 1] = ci.size();
        }
    }
    return SparseMatrix(pixels, pixels, std::move(rp), std::move(ci), std::move(vals));
}

/// Paper's 3×3 cross-channel mixing matrix.
inline DenseMatrix cross_channel_paper() {
    return DenseMatrix(3, 3, {0.9, 0.05, 0.05, 0.0, 0.9, 0.1, 0.05, 0.1, 0.85});
}

struct KernelDescriptor {
    size_t size = 5;
    double sigma = 6.0;
    Boundary boundary = Boundary::Zero;
};

struct BlurModel {
    SparseMatrix A;    // within-channel operator, mn×mn
    DenseMatrix A_c;   // cross-channel mixing, 3×3
    KernelDescriptor kernel;
    size_t height = 0;
    size_t width = 0;
};

inline BlurModel make_blur_model(size_t height, size_t width, size_t kernel_size, double sigma,
                                 DenseMatrix cross = cross_channel_paper()) {
    if (cross.rows() != 3 || cross.cols() != 3)
        throw ConfigError("cross-channel matrix must be 3×3");
    BlurModel model;
    model.kernel = {kernel_size, sigma, Boundary::Zero};
    model.A = build_blur_operator(height, width, gaussian_kernel(kernel_size, sigma));
    model.A_c = std::move(cross);
    model.height = height;
    model.width = width;
    return model;
}

/// Observed stack B = A·X·A_cᵀ.
inline ChannelStack forward_blur(const BlurModel& model, const ChannelStack& x) {
    if (x.X.rows() != model.height * model.width || x.X.cols() != 3)
        throw ShapeError("forward_blur: stack shape mismatch");
    ChannelStack out;
    out.height = x.height;
    out.width = x.width;
    out.X = matmul(matmul(model.A, x.X), transpose(model.A_c));
    return out;
}

/// Solves the restoration system; the matrix-equation right factor is A_cᵀ.
/// Iterates are unclamped; clamping happens only at image export.
inline std::pair<ChannelStack, SolveReport> restore(const BlurModel& model,
                                                    const ChannelStack& observed,
                                                    const SolveConfig& cfg) {
    if (observed.X.rows() != model.height * model.width || observed.X.cols() != 3)
        throw ShapeError("restore: observed stack shape mismatch");
    Solver solver(model.A, transpose(model.A_c), observed.X,
                  DenseMatrix(observed.X.rows(), 3), cfg);
    SolveReport rep = solver.run();
    ChannelStack out;
    out.height = observed.height;
    out.width = observed.width;
    out.X = rep.X;
    return {std::move(out), std::move(rep)};
}

// ---------------------------------------------------------------------------
// Quality metrics

/// Peak signal-to-noise ratio in dB over all samples; +inf for identical images.
inline double psnr(const ColorImage& reference, const ColorImage& test) {
    if (reference.height != test.height || reference.width != test.width)
        throw ShapeError("psnr: image dimensions differ");
    double mse = 0.0;
    const size_t n = reference.height * reference.width;
    for (size_t c = 0; c < 3; ++c)
        for (size_t t = 0; t < n; ++t) {
            const double d = reference.planes[c][t] - test.planes[c][t];
            mse += d * d;
        }
    mse /= static_cast<double>(3 * n);
    if (mse == 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(1.0 / mse);
}

namespace detail {

inline DenseMatrix ssim_window() {
    return gaussian_kernel(11, 1.5);
}

inline double ssim_channel(const std::vector<double>& x, const std::vector<double>& y,
                           size_t height, size_t width, const DenseMatrix& win) {
    const size_t w = win.rows(), half = w / 2;
    const double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
    double total = 0.0;
    size_t count = 0;
    for (size_t i = half; i + half < height; ++i) {
        for (size_t j = half; j + half < width; ++j) {
            double mx = 0.0, my = 0.0, sxx = 0.0, syy = 0.0, sxy = 0.0;
            for (size_t u = 0; u < w; ++u)
                for (size_t v = 0; v < w; ++v) {
                    const double wt = win(u, v);
                    const double xv = x[(i + u - half) * width + (j + v - half)];
                    const double yv = y[(i + u - half) * width + (j + v - half)];
                    mx += wt * xv;
                    my += wt * yv;
                    sxx += wt * xv * xv;
                    syy += wt * yv * yv;
                    sxy += wt * xv * yv;
                }
            const double vx = sxx - mx * mx;
            const double vy = syy - my * my;
            const double cxy = sxy - mx * my;
            total += ((2.0 * mx * my + c1) * (2.0 * cxy + c2)) /
                     ((mx * mx + my * my + c1) * (vx + vy + c2));
            ++count;
        }
    }
    return total / static_cast<double>(count);
}

}  // namespace detail

/// Single-scale SSIM with an 11×11 Gaussian window (σ = 1.5) on unit dynamic
/// range, evaluated where the window fits fully, averaged over channels.
inline double ssim(const ColorImage& reference, const ColorImage& test) {
    if (reference.height != test.height || reference.width != test.width)
        throw ShapeError("ssim: image dimensions differ");
    if (std::min(reference.height, reference.width) < 11)
        throw ConfigError("ssim: image smaller than the 11×11 window");
    DenseMatrix win = detail::ssim_window();
    double total = 0.0;
    for (size_t c = 0; c < 3; ++c)
        total += detail::ssim_channel(reference.planes[c], test.planes[c], reference.height,
                                      reference.width, win);
    return total / 3.0;
}

// ---------------------------------------------------------------------------
// Shipped fixture

/// Deterministic colored geometric test pattern: gradients, a block, a disc,
/// and diagonal stripes give the blur something sharp to destroy.
inline ColorImage synthetic_test_image(size_t height, size_t width) {
    ColorImage img(height, width);
    const double hd = static_cast<double>(height - 1);
    const double wd = static_cast<double>(width - 1);
    for (size_t i = 0; i < height; ++i) {
        for (size_t j = 0; j < width; ++j) {
            const double fi = static_cast<double>(i) / hd;
            const double fj = static_cast<double>(j) / wd;
            double r = 0.15 + 0.50 * fi;
            double g = 0.20 + 0.40 * fj;
            double b = 0.70 - 0.30 * (fi + fj) / 2.0;
            if (fi >= 0.15 && fi < 0.45 && fj >= 0.10 && fj < 0.55) {
                r = 0.95;
                g = 0.25;
                b = 0.20;
            }
            const double di = fi - 0.65, dj = fj - 0.62;
            if (di * di + dj * dj < 0.20 * 0.20) {
                r = 0.15;
                g = 0.85;
                b = 0.30;
            }
            if (fi + fj > 1.25 && (i + j) % 6 < 3) {
                r = 0.95;
                g = 0.95;
                b = 0.95;
            }
            img.at(0, i, j) = r;
            img.at(1, i, j) = g;
            img.at(2, i, j) = b;
        }
    }
    img.clamp01();
    return img;
}

}  // namespace axb
