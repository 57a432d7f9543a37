#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "fitrec/nn.hpp"

// Optimizer, mini-batch trainers and the binary checkpoint format.
//
// Batch gradients are averaged with a pairwise (binary-counter) reduction so
// the result uses O(log B) buffers and doubling a batch leaves the mean
// gradient bitwise unchanged. Per-epoch shuffles derive their stream from
// (seed, epoch), so runs are reproducible bit for bit.

namespace fitrec {

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9, beta2 = 0.999;
    double eps = 1e-8;
};

template <typename T>
struct AdamState {
    std::int64_t step = 0;
    std::vector<std::vector<T>> m, v;  // one slot per tensor, for_each order
};

/// One bias-corrected Adam update; state slots are created lazily on first use.
template <typename Params, typename T>
void adam_step(Params& p, const Params& g, AdamState<T>& st, const AdamConfig& cfg) {
    std::vector<T*> pw;
    std::vector<const T*> gw;
    std::vector<std::size_t> sz;
    p.for_each([&](const char*, Tensor<T>& t) {
        pw.push_back(t.data());
        sz.push_back(t.size());
    });
    g.for_each([&](const char*, const Tensor<T>& t) { gw.push_back(t.data()); });
    if (pw.size() != gw.size()) throw ShapeMismatch("parameter/gradient tensor mismatch");
    if (st.m.empty()) {
        st.m.resize(pw.size());
        st.v.resize(pw.size());
        for (std::size_t i = 0; i < pw.size(); ++i) {
            st.m[i].assign(sz[i], T(0));
            st.v[i].assign(sz[i], T(0));
        }
    }
    st.step += 1;
    const T b1 = static_cast<T>(cfg.beta1), b2 = static_cast<T>(cfg.beta2);
    const T c1 = static_cast<T>(1.0 - std::pow(cfg.beta1, static_cast<double>(st.step)));
    const T c2 = static_cast<T>(1.0 - std::pow(cfg.beta2, static_cast<double>(st.step)));
    const T lr = static_cast<T>(cfg.lr), eps = static_cast<T>(cfg.eps);
    for (std::size_t i = 0; i < pw.size(); ++i) {
        T* w = pw[i];
        const T* grad = gw[i];
        T* m = st.m[i].data();
        T* v = st.v[i].data();
        for (std::size_t j = 0; j < sz[i]; ++j) {
            m[j] = b1 * m[j] + (T(1) - b1) * grad[j];
            v[j] = b2 * v[j] + (T(1) - b2) * grad[j] * grad[j];
            const T mhat = m[j] / c1;
            const T vhat = v[j] / c2;
            w[j] -= lr * mhat / (std::sqrt(vhat) + eps);
        }
    }
}

// ---- gradient accumulation --------------------------------------------------

/// Streaming pairwise sum of per-sample parameter gradients. Feed samples one
/// at a time; `finish` returns sum/denom (elementwise, fixed order).
template <typename Params, typename T>
class PairwiseAccumulator {
public:
    void add(const Params& g) {
        stack_.push_back(g);
        levels_.push_back(0);
        while (levels_.size() >= 2 && levels_[levels_.size() - 1] == levels_[levels_.size() - 2]) {
            merge_top_();
            levels_.pop_back();
            levels_.back() += 1;
        }
    }

    /// Remaining partial sums are folded earlier+later; result scaled by 1/denom.
    Params finish(T denom) {
        while (stack_.size() >= 2) {
            merge_top_();
            levels_.pop_back();
        }
        Params out = std::move(stack_.back());
        stack_.clear();
        levels_.clear();
        out.for_each([&](const char*, Tensor<T>& t) {
            for (T& x : t.v) x /= denom;
        });
        return out;
    }

    bool empty() const { return stack_.empty(); }

private:
    void merge_top_() {
        Params& dst = stack_[stack_.size() - 2];
        Params& src = stack_[stack_.size() - 1];
        std::vector<T*> d;
        std::vector<const T*> s;
        std::vector<std::size_t> n;
        dst.for_each([&](const char*, Tensor<T>& t) {
            d.push_back(t.data());
            n.push_back(t.size());
        });
        src.for_each([&](const char*, const Tensor<T>& t) { s.push_back(t.data()); });
        for (std::size_t i = 0; i < d.size(); ++i)
            for (std::size_t j = 0; j < n[i]; ++j) d[i][j] += s[i][j];
        stack_.pop_back();
    }

    std::vector<Params> stack_;
    std::vector<int> levels_;
};

/// Pairwise sum of scalars in index order (same tree shape as above).
template <typename T>
T pairwise_sum(const std::vector<T>& xs) {
    if (xs.empty()) return T(0);
    std::vector<T> stack;
    std::vector<int> levels;
    for (const T& x : xs) {
        stack.push_back(x);
        levels.push_back(0);
        while (levels.size() >= 2 && levels[levels.size() - 1] == levels[levels.size() - 2]) {
            stack[stack.size() - 2] += stack.back();
            stack.pop_back();
            levels.pop_back();
            levels.back() += 1;
        }
    }
    while (stack.size() >= 2) {
        stack[stack.size() - 2] += stack.back();
        stack.pop_back();
    }
    return stack[0];
}

// ---- datasets ---------------------------------------------------------------

/// Fixed-size point sets: pts holds size()*n_points*3 floats.
struct PointDataset {
    int n_points = 0;
    std::vector<float> pts;
    std::vector<int> labels;
    std::size_t size() const { return labels.size(); }
    const float* sample(std::size_t i) const {
        return pts.data() + i * static_cast<std::size_t>(n_points) * 3;
    }
};

/// Fixed view stacks: imgs holds size()*views*side*side floats (usually
/// intensities scaled to [0,1]).
struct ViewDataset {
    int views = 0;
    int side = 0;
    std::vector<float> imgs;
    std::vector<int> labels;
    std::size_t size() const { return labels.size(); }
    const float* sample(std::size_t i) const {
        return imgs.data() + i * static_cast<std::size_t>(views) * side * side;
    }
};

// ---- training ---------------------------------------------------------------

struct EpochStats {
    double train_loss = 0;
    double val_loss = 0;
    double val_accuracy = 0;
};

struct TrainConfig {
    int epochs = 30;
    int batch = 32;
    AdamConfig adam;
    std::uint64_t seed = 1;
    /// stop once validation accuracy reaches this (negative = run all epochs)
    double stop_at_val_accuracy = -1.0;
    /// progress hook, called after each epoch; never affects the result
    std::function<void(int, const EpochStats&)> on_epoch;
};

std::vector<EpochStats> train_pointnet(PointNetParams<float>& params,
                                       const PointDataset& train, const PointDataset& val,
                                       const TrainConfig& cfg);
std::vector<EpochStats> train_mvcnn(MvcnnParams<float>& params, const ViewDataset& train,
                                    const ViewDataset& val, const TrainConfig& cfg);

/// argmax with first-wins ties
int predict_label(const std::vector<float>& logits);

std::vector<float> pointnet_logits(const PointNetParams<float>& p, const float* pts, int n);
std::vector<float> mvcnn_logits(const MvcnnParams<float>& p, const float* views, int k);
std::vector<float> pointnet_embedding(const PointNetParams<float>& p, const float* pts, int n);
std::vector<float> mvcnn_embedding(const MvcnnParams<float>& p, const float* views, int k);

// ---- checkpoints ------------------------------------------------------------

inline constexpr int kCheckpointPointNet = 1;
inline constexpr int kCheckpointMvcnn = 2;

/// The comment travels with the file (provenance: seed, config digest).
void save_checkpoint(const std::string& path, const PointNetParams<float>& p,
                     const std::string& comment = "");
void save_checkpoint(const std::string& path, const MvcnnParams<float>& p,
                     const std::string& comment = "");
/// Reads just the header; returns kCheckpointPointNet or kCheckpointMvcnn.
int checkpoint_kind(const std::string& path);
std::string checkpoint_comment(const std::string& path);
PointNetParams<float> load_pointnet_checkpoint(const std::string& path);
MvcnnParams<float> load_mvcnn_checkpoint(const std::string& path);

}  // namespace fitrec
