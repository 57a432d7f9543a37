#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "fitrec/rng.hpp"
#include "fitrec/tensor.hpp"

// Two compact trainable classifiers over the same parameter/visitation
// machinery:
//   - a point-set network: shared per-point MLP, element-wise max over points
//     (first maximum wins ties), then a small classifier head; optionally an
//     input-transform subnetwork predicting a 3x3 matrix added to identity;
//   - a multi-view network: shared conv stack per view (conv5-relu-pool2
//     twice, then a dense feature layer), element-wise max across views, then
//     a linear head.
// Everything is templated on the scalar so training runs in float and
// gradient verification in double. All reductions use fixed orders; forward
// results are exactly invariant to point order / view order.

namespace fitrec {

// ---- point-set network ------------------------------------------------------

struct PointNetConfig {
    int in_dim = 3;
    int h1 = 64, h2 = 128, feat = 256;  // shared per-point stack
    int head = 128;                     // classifier hidden width
    int classes = 18;
    bool use_tnet = false;
    int t_h1 = 32, t_h2 = 64, t_head = 32;
};

template <typename T>
struct PointNetParams {
    PointNetConfig cfg;
    // weights stored [in x out]; biases [out]
    Tensor<T> w1, b1, w2, b2, w3, b3;  // per-point stack
    Tensor<T> wh, bh, wo, bo;          // head hidden + output
    Tensor<T> tw1, tb1, tw2, tb2, twh, tbh, two, tbo;  // input transform

    template <typename F>
    void for_each(F&& f) {
        f("w1", w1); f("b1", b1); f("w2", w2); f("b2", b2);
        f("w3", w3); f("b3", b3); f("wh", wh); f("bh", bh);
        f("wo", wo); f("bo", bo);
        if (cfg.use_tnet) {
            f("tw1", tw1); f("tb1", tb1); f("tw2", tw2); f("tb2", tb2);
            f("twh", twh); f("tbh", tbh); f("two", two); f("tbo", tbo);
        }
    }
    template <typename F>
    void for_each(F&& f) const {
        const_cast<PointNetParams*>(this)->for_each(
            [&](const char* name, Tensor<T>& t) { f(name, const_cast<const Tensor<T>&>(t)); });
    }

    /// Same tensor shapes, all zero.
    PointNetParams zeros_like() const {
        PointNetParams g = *this;
        g.for_each([](const char*, Tensor<T>& t) { t.fill(T(0)); });
        return g;
    }
};

namespace detail {

template <typename T>
inline void glorot_fill(Tensor<T>& t, int fan_in, int fan_out, Rng& rng) {
    const double s = std::sqrt(6.0 / (fan_in + fan_out));
    for (T& x : t.v) x = static_cast<T>(rng.uniform(-s, s));
}

}  // namespace detail

/// Glorot-uniform weights (s = sqrt(6/(fan_in+fan_out))), zero biases, drawn
/// in a fixed tensor order from one seeded stream.
template <typename T>
PointNetParams<T> init_pointnet(const PointNetConfig& cfg, std::uint64_t seed) {
    if (cfg.in_dim < 1 || cfg.h1 < 1 || cfg.h2 < 1 || cfg.feat < 1 || cfg.head < 1 ||
        cfg.classes < 2)
        throw ShapeMismatch("bad point-set network configuration");
    PointNetParams<T> p;
    p.cfg = cfg;
    p.w1 = Tensor<T>({cfg.in_dim, cfg.h1});
    p.b1 = Tensor<T>({cfg.h1});
    p.w2 = Tensor<T>({cfg.h1, cfg.h2});
    p.b2 = Tensor<T>({cfg.h2});
    p.w3 = Tensor<T>({cfg.h2, cfg.feat});
    p.b3 = Tensor<T>({cfg.feat});
    p.wh = Tensor<T>({cfg.feat, cfg.head});
    p.bh = Tensor<T>({cfg.head});
    p.wo = Tensor<T>({cfg.head, cfg.classes});
    p.bo = Tensor<T>({cfg.classes});
    if (cfg.use_tnet) {
        p.tw1 = Tensor<T>({cfg.in_dim, cfg.t_h1});
        p.tb1 = Tensor<T>({cfg.t_h1});
        p.tw2 = Tensor<T>({cfg.t_h1, cfg.t_h2});
        p.tb2 = Tensor<T>({cfg.t_h2});
        p.twh = Tensor<T>({cfg.t_h2, cfg.t_head});
        p.tbh = Tensor<T>({cfg.t_head});
        p.two = Tensor<T>({cfg.t_head, cfg.in_dim * cfg.in_dim});
        p.tbo = Tensor<T>({cfg.in_dim * cfg.in_dim});
    }
    Rng rng(seed);
    p.for_each([&](const char* name, Tensor<T>& t) {
        if (t.shape.size() == 2) detail::glorot_fill(t, t.shape[0], t.shape[1], rng);
        (void)name;  // biases stay zero
    });
    return p;
}

template <typename T>
struct PointNetTrace {
    int n = 0;
    std::vector<T> x_in;              // original points, n x 3
    std::vector<T> x;                 // transformed points (== x_in without t-net)
    std::vector<T> tmat;              // 3x3 transform M = I + A (t-net only)
    std::vector<T> t_a1, t_z1, t_a2, t_z2, t_pool, t_ah, t_zh;
    std::vector<int> t_arg;
    std::vector<T> a1, z1, a2, z2, a3, z3;  // per-point pre/post relu
    std::vector<T> pooled;            // feat (the embedding)
    std::vector<int> arg;             // winning point per feature element
    std::vector<T> ah, zh;            // head hidden pre/post relu
    std::vector<T> logits;
};

namespace detail {

template <typename T>
inline void linear_rows(const std::vector<T>& x, const Tensor<T>& w, const Tensor<T>& b,
                        std::vector<T>& y, int rows) {
    const int in = w.shape[0], out = w.shape[1];
    y.assign(static_cast<std::size_t>(rows) * out, T(0));
    for (int i = 0; i < rows; ++i)
        for (int j = 0; j < out; ++j) y[static_cast<std::size_t>(i) * out + j] = b.v[j];
    gemm_accum(x.data(), w.v.data(), y.data(), rows, in, out);
}

template <typename T>
inline void relu(const std::vector<T>& a, std::vector<T>& z) {
    z.resize(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) z[i] = a[i] > T(0) ? a[i] : T(0);
}

/// column-wise max over rows; first maximal row wins
template <typename T>
inline void max_over_rows(const std::vector<T>& z, int rows, int cols,
                          std::vector<T>& out, std::vector<int>& arg) {
    out.assign(cols, T(0));
    arg.assign(cols, 0);
    for (int j = 0; j < cols; ++j) {
        T best = z[j];
        int bi = 0;
        for (int i = 1; i < rows; ++i) {
            const T v = z[static_cast<std::size_t>(i) * cols + j];
            if (v > best) {
                best = v;
                bi = i;
            }
        }
        out[j] = best;
        arg[j] = bi;
    }
}

}  // namespace detail

/// Forward pass over n points (flat n x 3, row per point). Fills the trace;
/// logits land in trace.logits and the embedding in trace.pooled.
template <typename T>
void pointnet_forward(const T* pts, int n, const PointNetParams<T>& p,
                      PointNetTrace<T>& tr) {
    if (n < 1) throw ShapeMismatch("need at least one point");
    const PointNetConfig& c = p.cfg;
    tr.n = n;
    tr.x_in.assign(pts, pts + static_cast<std::size_t>(n) * c.in_dim);

    if (c.use_tnet) {
        detail::linear_rows(tr.x_in, p.tw1, p.tb1, tr.t_a1, n);
        detail::relu(tr.t_a1, tr.t_z1);
        detail::linear_rows(tr.t_z1, p.tw2, p.tb2, tr.t_a2, n);
        detail::relu(tr.t_a2, tr.t_z2);
        detail::max_over_rows(tr.t_z2, n, c.t_h2, tr.t_pool, tr.t_arg);
        detail::linear_rows(tr.t_pool, p.twh, p.tbh, tr.t_ah, 1);
        detail::relu(tr.t_ah, tr.t_zh);
        std::vector<T> a_flat;
        detail::linear_rows(tr.t_zh, p.two, p.tbo, a_flat, 1);
        tr.tmat = a_flat;  // A, then M = I + A
        for (int i = 0; i < c.in_dim; ++i) tr.tmat[i * c.in_dim + i] += T(1);
        // x = x_in * M (points as row vectors)
        tr.x.assign(static_cast<std::size_t>(n) * c.in_dim, T(0));
        gemm_accum(tr.x_in.data(), tr.tmat.data(), tr.x.data(), n, c.in_dim, c.in_dim);
    } else {
        tr.x = tr.x_in;
    }

    detail::linear_rows(tr.x, p.w1, p.b1, tr.a1, n);
    detail::relu(tr.a1, tr.z1);
    detail::linear_rows(tr.z1, p.w2, p.b2, tr.a2, n);
    detail::relu(tr.a2, tr.z2);
    detail::linear_rows(tr.z2, p.w3, p.b3, tr.a3, n);
    detail::relu(tr.a3, tr.z3);
    detail::max_over_rows(tr.z3, n, c.feat, tr.pooled, tr.arg);
    detail::linear_rows(tr.pooled, p.wh, p.bh, tr.ah, 1);
    detail::relu(tr.ah, tr.zh);
    detail::linear_rows(tr.zh, p.wo, p.bo, tr.logits, 1);
}

/// Reverse pass; accumulates (+=) into grads, which must hold zero-initialized
/// tensors of the parameter shapes.
template <typename T>
void pointnet_backward(const PointNetTrace<T>& tr, const PointNetParams<T>& p,
                       const T* dlogits, PointNetParams<T>& grads) {
    const PointNetConfig& c = p.cfg;
    const int n = tr.n;

    // head output
    std::vector<T> dzh(c.head, T(0));
    gemm_accum_at(tr.zh.data(), dlogits, grads.wo.data(), 1, c.head, c.classes);
    for (int j = 0; j < c.classes; ++j) grads.bo.v[j] += dlogits[j];
    gemm_accum_bt(dlogits, p.wo.v.data(), dzh.data(), 1, c.classes, c.head);

    std::vector<T> dah(c.head);
    for (int j = 0; j < c.head; ++j) dah[j] = tr.ah[j] > T(0) ? dzh[j] : T(0);

    std::vector<T> dpool(c.feat, T(0));
    gemm_accum_at(tr.pooled.data(), dah.data(), grads.wh.data(), 1, c.feat, c.head);
    for (int j = 0; j < c.head; ++j) grads.bh.v[j] += dah[j];
    gemm_accum_bt(dah.data(), p.wh.v.data(), dpool.data(), 1, c.head, c.feat);

    // unpool to the winning points
    std::vector<T> dz3(static_cast<std::size_t>(n) * c.feat, T(0));
    for (int j = 0; j < c.feat; ++j)
        dz3[static_cast<std::size_t>(tr.arg[j]) * c.feat + j] = dpool[j];

    std::vector<T> da3(dz3.size());
    for (std::size_t i = 0; i < dz3.size(); ++i)
        da3[i] = tr.a3[i] > T(0) ? dz3[i] : T(0);
    gemm_accum_at(tr.z2.data(), da3.data(), grads.w3.data(), n, c.h2, c.feat);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < c.feat; ++j)
            grads.b3.v[j] += da3[static_cast<std::size_t>(i) * c.feat + j];
    std::vector<T> dz2(static_cast<std::size_t>(n) * c.h2, T(0));
    gemm_accum_bt(da3.data(), p.w3.v.data(), dz2.data(), n, c.feat, c.h2);

    std::vector<T> da2(dz2.size());
    for (std::size_t i = 0; i < dz2.size(); ++i)
        da2[i] = tr.a2[i] > T(0) ? dz2[i] : T(0);
    gemm_accum_at(tr.z1.data(), da2.data(), grads.w2.data(), n, c.h1, c.h2);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < c.h2; ++j)
            grads.b2.v[j] += da2[static_cast<std::size_t>(i) * c.h2 + j];
    std::vector<T> dz1(static_cast<std::size_t>(n) * c.h1, T(0));
    gemm_accum_bt(da2.data(), p.w2.v.data(), dz1.data(), n, c.h2, c.h1);

    std::vector<T> da1(dz1.size());
    for (std::size_t i = 0; i < dz1.size(); ++i)
        da1[i] = tr.a1[i] > T(0) ? dz1[i] : T(0);
    gemm_accum_at(tr.x.data(), da1.data(), grads.w1.data(), n, c.in_dim, c.h1);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < c.h1; ++j)
            grads.b1.v[j] += da1[static_cast<std::size_t>(i) * c.h1 + j];

    if (!c.use_tnet) return;

    // dx = da1 * w1^T, then through x = x_in * M
    std::vector<T> dx(static_cast<std::size_t>(n) * c.in_dim, T(0));
    gemm_accum_bt(da1.data(), p.w1.v.data(), dx.data(), n, c.h1, c.in_dim);

    std::vector<T> dmat(static_cast<std::size_t>(c.in_dim) * c.in_dim, T(0));
    gemm_accum_at(tr.x_in.data(), dx.data(), dmat.data(), n, c.in_dim, c.in_dim);
    // (the x_in branch of dx would matter only if something upstream consumed
    // point gradients; inputs are leaves here)

    // A -> t-net head
    std::vector<T> d_tzh(c.t_head, T(0));
    gemm_accum_at(tr.t_zh.data(), dmat.data(), grads.two.data(), 1, c.t_head,
                  c.in_dim * c.in_dim);
    for (int j = 0; j < c.in_dim * c.in_dim; ++j) grads.tbo.v[j] += dmat[j];
    gemm_accum_bt(dmat.data(), p.two.v.data(), d_tzh.data(), 1, c.in_dim * c.in_dim,
                  c.t_head);

    std::vector<T> d_tah(c.t_head);
    for (int j = 0; j < c.t_head; ++j) d_tah[j] = tr.t_ah[j] > T(0) ? d_tzh[j] : T(0);
    std::vector<T> d_tpool(c.t_h2, T(0));
    gemm_accum_at(tr.t_pool.data(), d_tah.data(), grads.twh.data(), 1, c.t_h2, c.t_head);
    for (int j = 0; j < c.t_head; ++j) grads.tbh.v[j] += d_tah[j];
    gemm_accum_bt(d_tah.data(), p.twh.v.data(), d_tpool.data(), 1, c.t_head, c.t_h2);

    std::vector<T> d_tz2(static_cast<std::size_t>(n) * c.t_h2, T(0));
    for (int j = 0; j < c.t_h2; ++j)
        d_tz2[static_cast<std::size_t>(tr.t_arg[j]) * c.t_h2 + j] = d_tpool[j];

    std::vector<T> d_ta2(d_tz2.size());
    for (std::size_t i = 0; i < d_tz2.size(); ++i)
        d_ta2[i] = tr.t_a2[i] > T(0) ? d_tz2[i] : T(0);
    gemm_accum_at(tr.t_z1.data(), d_ta2.data(), grads.tw2.data(), n, c.t_h1, c.t_h2);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < c.t_h2; ++j)
            grads.tb2.v[j] += d_ta2[static_cast<std::size_t>(i) * c.t_h2 + j];
    std::vector<T> d_tz1(static_cast<std::size_t>(n) * c.t_h1, T(0));
    gemm_accum_bt(d_ta2.data(), p.tw2.v.data(), d_tz1.data(), n, c.t_h2, c.t_h1);

    std::vector<T> d_ta1(d_tz1.size());
    for (std::size_t i = 0; i < d_tz1.size(); ++i)
        d_ta1[i] = tr.t_a1[i] > T(0) ? d_tz1[i] : T(0);
    gemm_accum_at(tr.x_in.data(), d_ta1.data(), grads.tw1.data(), n, c.in_dim, c.t_h1);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < c.t_h1; ++j)
            grads.tb1.v[j] += d_ta1[static_cast<std::size_t>(i) * c.t_h1 + j];
}

// ---- multi-view network -----------------------------------------------------

struct MvcnnConfig {
    int side = 64;  // square input images
    int conv1 = 8, conv2 = 16, kernel = 5;
    int feature = 128;
    int classes = 18;

    int c1_out() const { return side - kernel + 1; }
    int p1_out() const { return c1_out() / 2; }
    int c2_out() const { return p1_out() - kernel + 1; }
    int p2_out() const { return c2_out() / 2; }
    int flat() const { return p2_out() * p2_out() * conv2; }
};

template <typename T>
struct MvcnnParams {
    MvcnnConfig cfg;
    Tensor<T> k1, cb1;  // {conv1, 1*kernel*kernel}, {conv1}
    Tensor<T> k2, cb2;  // {conv2, conv1*kernel*kernel}, {conv2}
    Tensor<T> wd, bd;   // dense {flat, feature}
    Tensor<T> wo, bo;   // head {feature, classes}

    template <typename F>
    void for_each(F&& f) {
        f("k1", k1); f("cb1", cb1); f("k2", k2); f("cb2", cb2);
        f("wd", wd); f("bd", bd); f("wo", wo); f("bo", bo);
    }
    template <typename F>
    void for_each(F&& f) const {
        const_cast<MvcnnParams*>(this)->for_each(
            [&](const char* name, Tensor<T>& t) { f(name, const_cast<const Tensor<T>&>(t)); });
    }

    /// Same tensor shapes, all zero.
    MvcnnParams zeros_like() const {
        MvcnnParams g = *this;
        g.for_each([](const char*, Tensor<T>& t) { t.fill(T(0)); });
        return g;
    }
};

template <typename T>
MvcnnParams<T> init_mvcnn(const MvcnnConfig& cfg, std::uint64_t seed) {
    if (cfg.kernel < 1 || cfg.conv1 < 1 || cfg.conv2 < 1 || cfg.feature < 1 ||
        cfg.classes < 2 || cfg.c2_out() < 1 || cfg.p2_out() < 1)
        throw ShapeMismatch("image side too small for the conv stack");
    MvcnnParams<T> p;
    p.cfg = cfg;
    const int kk = cfg.kernel * cfg.kernel;
    p.k1 = Tensor<T>({cfg.conv1, kk});
    p.cb1 = Tensor<T>({cfg.conv1});
    p.k2 = Tensor<T>({cfg.conv2, cfg.conv1 * kk});
    p.cb2 = Tensor<T>({cfg.conv2});
    p.wd = Tensor<T>({cfg.flat(), cfg.feature});
    p.bd = Tensor<T>({cfg.feature});
    p.wo = Tensor<T>({cfg.feature, cfg.classes});
    p.bo = Tensor<T>({cfg.classes});

    Rng rng(seed);
    detail::glorot_fill(p.k1, kk, cfg.conv1 * kk, rng);
    detail::glorot_fill(p.k2, cfg.conv1 * kk, cfg.conv2 * kk, rng);
    detail::glorot_fill(p.wd, cfg.flat(), cfg.feature, rng);
    detail::glorot_fill(p.wo, cfg.feature, cfg.classes, rng);
    return p;
}

namespace detail {

/// im2col for stride-1 valid convolution over a [cin x side x side] image:
/// cols[(ci*k + dy)*k + dx][oy*out + ox] = img[ci][oy+dy][ox+dx]
template <typename T>
inline void im2col(const T* img, int cin, int side, int k, std::vector<T>& cols) {
    const int out = side - k + 1;
    cols.assign(static_cast<std::size_t>(cin) * k * k * out * out, T(0));
    std::size_t row = 0;
    for (int ci = 0; ci < cin; ++ci)
        for (int dy = 0; dy < k; ++dy)
            for (int dx = 0; dx < k; ++dx, ++row) {
                T* dst = cols.data() + row * out * out;
                const T* src = img + static_cast<std::size_t>(ci) * side * side;
                for (int oy = 0; oy < out; ++oy)
                    for (int ox = 0; ox < out; ++ox)
                        dst[oy * out + ox] = src[(oy + dy) * side + (ox + dx)];
            }
}

/// transpose of im2col: scatter-add column gradients back to the image
template <typename T>
inline void col2im_accum(const std::vector<T>& dcols, int cin, int side, int k, T* dimg) {
    const int out = side - k + 1;
    std::size_t row = 0;
    for (int ci = 0; ci < cin; ++ci)
        for (int dy = 0; dy < k; ++dy)
            for (int dx = 0; dx < k; ++dx, ++row) {
                const T* src = dcols.data() + row * out * out;
                T* dst = dimg + static_cast<std::size_t>(ci) * side * side;
                for (int oy = 0; oy < out; ++oy)
                    for (int ox = 0; ox < out; ++ox)
                        dst[(oy + dy) * side + (ox + dx)] += src[oy * out + ox];
            }
}

/// 2x2 stride-2 max pool per channel (odd trailing row/column dropped);
/// argmax scan order: (0,0),(0,1),(1,0),(1,1), first maximum wins
template <typename T>
inline void maxpool2(const std::vector<T>& z, int ch, int side, std::vector<T>& out,
                     std::vector<int>& arg) {
    const int q = side / 2;
    out.assign(static_cast<std::size_t>(ch) * q * q, T(0));
    arg.assign(out.size(), 0);
    for (int c = 0; c < ch; ++c) {
        const T* zc = z.data() + static_cast<std::size_t>(c) * side * side;
        for (int y = 0; y < q; ++y)
            for (int x = 0; x < q; ++x) {
                const int base = (2 * y) * side + 2 * x;
                const int cand[4] = {base, base + 1, base + side, base + side + 1};
                int bi = cand[0];
                T best = zc[cand[0]];
                for (int t = 1; t < 4; ++t)
                    if (zc[cand[t]] > best) {
                        best = zc[cand[t]];
                        bi = cand[t];
                    }
                const std::size_t o = (static_cast<std::size_t>(c) * q + y) * q + x;
                out[o] = best;
                arg[o] = bi;
            }
    }
}

}  // namespace detail

template <typename T>
struct MvcnnViewTrace {
    std::vector<T> cols1, a1, z1, p1;
    std::vector<int> arg1;
    std::vector<T> cols2, a2, z2, p2;
    std::vector<int> arg2;
    std::vector<T> ad, zd;  // dense pre/post relu (zd is the view feature)
};

template <typename T>
struct MvcnnTrace {
    std::vector<MvcnnViewTrace<T>> views;
    std::vector<T> pooled;  // feature (the embedding)
    std::vector<int> arg;   // winning view per feature element
    std::vector<T> logits;
};

/// Forward over k views, each a flat side x side image (row-major, any range;
/// callers normally feed intensities scaled to [0,1]).
template <typename T>
void mvcnn_forward(const T* views, int k_views, const MvcnnParams<T>& p,
                   MvcnnTrace<T>& tr) {
    if (k_views < 1) throw ShapeMismatch("need at least one view");
    const MvcnnConfig& c = p.cfg;
    const int kk = c.kernel * c.kernel;
    const int o1 = c.c1_out(), q1 = c.p1_out(), o2 = c.c2_out();

    tr.views.assign(k_views, {});
    for (int v = 0; v < k_views; ++v) {
        MvcnnViewTrace<T>& vt = tr.views[v];
        const T* img = views + static_cast<std::size_t>(v) * c.side * c.side;

        detail::im2col(img, 1, c.side, c.kernel, vt.cols1);
        vt.a1.assign(static_cast<std::size_t>(c.conv1) * o1 * o1, T(0));
        for (int co = 0; co < c.conv1; ++co)
            std::fill_n(vt.a1.begin() + static_cast<std::size_t>(co) * o1 * o1, o1 * o1,
                        p.cb1.v[co]);
        gemm_accum(p.k1.v.data(), vt.cols1.data(), vt.a1.data(), c.conv1, kk, o1 * o1);
        detail::relu(vt.a1, vt.z1);
        detail::maxpool2(vt.z1, c.conv1, o1, vt.p1, vt.arg1);

        detail::im2col(vt.p1.data(), c.conv1, q1, c.kernel, vt.cols2);
        vt.a2.assign(static_cast<std::size_t>(c.conv2) * o2 * o2, T(0));
        for (int co = 0; co < c.conv2; ++co)
            std::fill_n(vt.a2.begin() + static_cast<std::size_t>(co) * o2 * o2, o2 * o2,
                        p.cb2.v[co]);
        gemm_accum(p.k2.v.data(), vt.cols2.data(), vt.a2.data(), c.conv2, c.conv1 * kk,
                   o2 * o2);
        detail::relu(vt.a2, vt.z2);
        detail::maxpool2(vt.z2, c.conv2, o2, vt.p2, vt.arg2);

        detail::linear_rows(vt.p2, p.wd, p.bd, vt.ad, 1);
        detail::relu(vt.ad, vt.zd);
    }

    // view pooling: element-wise max of the view features
    tr.pooled.assign(c.feature, T(0));
    tr.arg.assign(c.feature, 0);
    for (int j = 0; j < c.feature; ++j) {
        T best = tr.views[0].zd[j];
        int bi = 0;
        for (int v = 1; v < k_views; ++v)
            if (tr.views[v].zd[j] > best) {
                best = tr.views[v].zd[j];
                bi = v;
            }
        tr.pooled[j] = best;
        tr.arg[j] = bi;
    }
    detail::linear_rows(tr.pooled, p.wo, p.bo, tr.logits, 1);
}

template <typename T>
void mvcnn_backward(const MvcnnTrace<T>& tr, const MvcnnParams<T>& p, const T* dlogits,
                    MvcnnParams<T>& grads) {
    const MvcnnConfig& c = p.cfg;
    const int kk = c.kernel * c.kernel;
    const int o1 = c.c1_out(), q1 = c.p1_out(), o2 = c.c2_out(), q2 = c.p2_out();
    const int k_views = static_cast<int>(tr.views.size());

    std::vector<T> dpool(c.feature, T(0));
    gemm_accum_at(tr.pooled.data(), dlogits, grads.wo.data(), 1, c.feature, c.classes);
    for (int j = 0; j < c.classes; ++j) grads.bo.v[j] += dlogits[j];
    gemm_accum_bt(dlogits, p.wo.v.data(), dpool.data(), 1, c.classes, c.feature);

    for (int v = 0; v < k_views; ++v) {
        const MvcnnViewTrace<T>& vt = tr.views[v];
        // feature gradient reaches only the winning view per element
        std::vector<T> dzd(c.feature, T(0));
        bool any = false;
        for (int j = 0; j < c.feature; ++j)
            if (tr.arg[j] == v) {
                dzd[j] = dpool[j];
                any = true;
            }
        if (!any) continue;

        std::vector<T> dad(c.feature);
        for (int j = 0; j < c.feature; ++j) dad[j] = vt.ad[j] > T(0) ? dzd[j] : T(0);
        gemm_accum_at(vt.p2.data(), dad.data(), grads.wd.data(), 1, c.flat(), c.feature);
        for (int j = 0; j < c.feature; ++j) grads.bd.v[j] += dad[j];
        std::vector<T> dp2(c.flat(), T(0));
        gemm_accum_bt(dad.data(), p.wd.v.data(), dp2.data(), 1, c.feature, c.flat());

        std::vector<T> dz2(static_cast<std::size_t>(c.conv2) * o2 * o2, T(0));
        for (std::size_t i = 0; i < dp2.size(); ++i) {
            const std::size_t ch = i / (static_cast<std::size_t>(q2) * q2);
            dz2[ch * o2 * o2 + vt.arg2[i]] += dp2[i];
        }
        std::vector<T> da2(dz2.size());
        for (std::size_t i = 0; i < dz2.size(); ++i)
            da2[i] = vt.a2[i] > T(0) ? dz2[i] : T(0);
        for (int co = 0; co < c.conv2; ++co) {
            const T* row = da2.data() + static_cast<std::size_t>(co) * o2 * o2;
            T acc = 0;
            for (int i = 0; i < o2 * o2; ++i) acc += row[i];
            grads.cb2.v[co] += acc;
        }
        gemm_accum_bt(da2.data(), vt.cols2.data(), grads.k2.data(), c.conv2, o2 * o2,
                      c.conv1 * kk);
        std::vector<T> dcols2(vt.cols2.size(), T(0));
        gemm_accum_at(p.k2.v.data(), da2.data(), dcols2.data(), c.conv2, c.conv1 * kk,
                      o2 * o2);
        std::vector<T> dp1(static_cast<std::size_t>(c.conv1) * q1 * q1, T(0));
        detail::col2im_accum(dcols2, c.conv1, q1, c.kernel, dp1.data());

        std::vector<T> dz1(static_cast<std::size_t>(c.conv1) * o1 * o1, T(0));
        for (std::size_t i = 0; i < dp1.size(); ++i) {
            const std::size_t ch = i / (static_cast<std::size_t>(q1) * q1);
            dz1[ch * o1 * o1 + vt.arg1[i]] += dp1[i];
        }
        std::vector<T> da1(dz1.size());
        for (std::size_t i = 0; i < dz1.size(); ++i)
            da1[i] = vt.a1[i] > T(0) ? dz1[i] : T(0);
        for (int co = 0; co < c.conv1; ++co) {
            const T* row = da1.data() + static_cast<std::size_t>(co) * o1 * o1;
            T acc = 0;
            for (int i = 0; i < o1 * o1; ++i) acc += row[i];
            grads.cb1.v[co] += acc;
        }
        gemm_accum_bt(da1.data(), vt.cols1.data(), grads.k1.data(), c.conv1, o1 * o1, kk);
        // input images are leaves; no dcols1 needed
    }
}

}  // namespace fitrec
