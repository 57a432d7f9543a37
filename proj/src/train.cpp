#include "fitrec/train.hpp"

#include <cstring>
#include <fstream>
#include <numeric>

#include "fitrec/errors.hpp"

namespace fitrec {

namespace {

template <typename Dataset>
void check_labels(const Dataset& ds, int classes, const char* which) {
    for (int lab : ds.labels)
        if (lab < 0 || lab >= classes)
            throw ShapeMismatch(std::string("label out of range in ") + which + " set");
}

// Shared epoch loop. `fwd(params, data, i, trace)` runs the model on sample i
// and must leave logits in trace.logits; `bwd` accumulates gradients.
template <typename Params, typename Trace, typename Dataset, typename Fwd, typename Bwd>
std::vector<EpochStats> train_loop(Params& params, const Dataset& train, const Dataset& val,
                                   const TrainConfig& cfg, int classes, Fwd fwd, Bwd bwd) {
    if (train.size() == 0) throw EmptyTrainSet("no training samples");
    if (cfg.batch < 1) throw Error("batch size must be positive");
    check_labels(train, classes, "training");
    check_labels(val, classes, "validation");

    Trace tr;
    std::vector<float> probs(classes), dlogits(classes);
    Params gsample = params.zeros_like();
    PairwiseAccumulator<Params, float> acc;
    AdamState<float> adam;
    std::vector<EpochStats> history;

    const std::size_t n = train.size();
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::vector<std::size_t> idx(n);
        std::iota(idx.begin(), idx.end(), std::size_t{0});
        Rng shuf(derive_seed(cfg.seed, static_cast<std::uint64_t>(epoch)));
        shuf.shuffle(idx);

        std::vector<double> batch_sums;
        for (std::size_t start = 0; start < n; start += static_cast<std::size_t>(cfg.batch)) {
            const std::size_t bsz = std::min(static_cast<std::size_t>(cfg.batch), n - start);
            std::vector<float> losses;
            losses.reserve(bsz);
            for (std::size_t k = 0; k < bsz; ++k) {
                const std::size_t i = idx[start + k];
                fwd(params, train, i, tr);
                const int label = train.labels[i];
                losses.push_back(
                    softmax_cross_entropy(tr.logits.data(), classes, label, probs.data()));
                for (int j = 0; j < classes; ++j)
                    dlogits[j] = probs[j] - (j == label ? 1.0f : 0.0f);
                gsample.for_each([](const char*, Tensor<float>& t) { t.fill(0.0f); });
                bwd(tr, params, dlogits.data(), gsample);
                acc.add(gsample);
            }
            Params gmean = acc.finish(static_cast<float>(bsz));
            adam_step(params, gmean, adam, cfg.adam);
            batch_sums.push_back(static_cast<double>(pairwise_sum(losses)));
        }

        EpochStats st;
        st.train_loss = pairwise_sum(batch_sums) / static_cast<double>(n);
        if (val.size() > 0) {
            std::vector<double> vlosses;
            vlosses.reserve(val.size());
            std::size_t correct = 0;
            for (std::size_t i = 0; i < val.size(); ++i) {
                fwd(params, val, i, tr);
                vlosses.push_back(static_cast<double>(softmax_cross_entropy(
                    tr.logits.data(), classes, val.labels[i], probs.data())));
                if (predict_label(tr.logits) == val.labels[i]) ++correct;
            }
            st.val_loss = pairwise_sum(vlosses) / static_cast<double>(val.size());
            st.val_accuracy = static_cast<double>(correct) / static_cast<double>(val.size());
        }
        history.push_back(st);
        if (cfg.on_epoch) cfg.on_epoch(epoch, st);
        if (cfg.stop_at_val_accuracy >= 0.0 && val.size() > 0 &&
            st.val_accuracy >= cfg.stop_at_val_accuracy)
            break;
    }
    return history;
}

}  // namespace

int predict_label(const std::vector<float>& logits) {
    int best = 0;
    for (int j = 1; j < static_cast<int>(logits.size()); ++j)
        if (logits[j] > logits[best]) best = j;
    return best;
}

std::vector<EpochStats> train_pointnet(PointNetParams<float>& params, const PointDataset& train,
                                       const PointDataset& val, const TrainConfig& cfg) {
    auto fwd = [](const PointNetParams<float>& p, const PointDataset& ds, std::size_t i,
                  PointNetTrace<float>& tr) {
        pointnet_forward(ds.sample(i), ds.n_points, p, tr);
    };
    auto bwd = [](const PointNetTrace<float>& tr, const PointNetParams<float>& p,
                  const float* dl, PointNetParams<float>& g) {
        pointnet_backward(tr, p, dl, g);
    };
    return train_loop<PointNetParams<float>, PointNetTrace<float>>(params, train, val, cfg,
                                                                   params.cfg.classes, fwd, bwd);
}

std::vector<EpochStats> train_mvcnn(MvcnnParams<float>& params, const ViewDataset& train,
                                    const ViewDataset& val, const TrainConfig& cfg) {
    if (train.side != params.cfg.side || (val.size() > 0 && val.side != params.cfg.side))
        throw ShapeMismatch("dataset image side does not match the model");
    auto fwd = [](const MvcnnParams<float>& p, const ViewDataset& ds, std::size_t i,
                  MvcnnTrace<float>& tr) {
        mvcnn_forward(ds.sample(i), ds.views, p, tr);
    };
    auto bwd = [](const MvcnnTrace<float>& tr, const MvcnnParams<float>& p, const float* dl,
                  MvcnnParams<float>& g) {
        mvcnn_backward(tr, p, dl, g);
    };
    return train_loop<MvcnnParams<float>, MvcnnTrace<float>>(params, train, val, cfg,
                                                             params.cfg.classes, fwd, bwd);
}

std::vector<float> pointnet_logits(const PointNetParams<float>& p, const float* pts, int n) {
    PointNetTrace<float> tr;
    pointnet_forward(pts, n, p, tr);
    return tr.logits;
}

std::vector<float> mvcnn_logits(const MvcnnParams<float>& p, const float* views, int k) {
    MvcnnTrace<float> tr;
    mvcnn_forward(views, k, p, tr);
    return tr.logits;
}

std::vector<float> pointnet_embedding(const PointNetParams<float>& p, const float* pts, int n) {
    PointNetTrace<float> tr;
    pointnet_forward(pts, n, p, tr);
    return tr.pooled;
}

std::vector<float> mvcnn_embedding(const MvcnnParams<float>& p, const float* views, int k) {
    MvcnnTrace<float> tr;
    mvcnn_forward(views, k, p, tr);
    return tr.pooled;
}

// ---- checkpoints ------------------------------------------------------------
//
// Layout (all integers little-endian u32, floats IEEE-754 binary32 LE):
//   magic "FITRECK1" | kind | n_config | config... | n_tensors |
//   per tensor: name_len name ndims dims... values...
// Config words: point-set h1 h2 feat head classes use_tnet t_h1 t_h2 t_head;
// multi-view side conv1 conv2 kernel feature classes.

namespace {

constexpr char kMagic[8] = {'F', 'I', 'T', 'R', 'E', 'C', 'K', '1'};

void w32(std::ostream& os, std::uint32_t v) {
    const unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                                static_cast<unsigned char>((v >> 8) & 0xff),
                                static_cast<unsigned char>((v >> 16) & 0xff),
                                static_cast<unsigned char>((v >> 24) & 0xff)};
    os.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t r32(std::istream& is) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    if (!is) throw ParseError("truncated checkpoint");
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

void wf32(std::ostream& os, float f) {
    std::uint32_t u;
    std::memcpy(&u, &f, 4);
    w32(os, u);
}

float rf32(std::istream& is) {
    const std::uint32_t u = r32(is);
    float f;
    std::memcpy(&f, &u, 4);
    return f;
}

template <typename Params>
void write_tensors(std::ostream& os, const Params& p) {
    std::uint32_t count = 0;
    p.for_each([&](const char*, const Tensor<float>&) { ++count; });
    w32(os, count);
    p.for_each([&](const char* name, const Tensor<float>& t) {
        const std::uint32_t len = static_cast<std::uint32_t>(std::strlen(name));
        w32(os, len);
        os.write(name, len);
        w32(os, static_cast<std::uint32_t>(t.shape.size()));
        for (int d : t.shape) w32(os, static_cast<std::uint32_t>(d));
        for (float x : t.v) wf32(os, x);
    });
}

template <typename Params>
void read_tensors(std::istream& is, Params& p) {
    const std::uint32_t count = r32(is);
    std::uint32_t expected = 0;
    p.for_each([&](const char*, const Tensor<float>&) { ++expected; });
    if (count != expected) throw ParseError("checkpoint tensor count mismatch");
    p.for_each([&](const char* name, Tensor<float>& t) {
        const std::uint32_t len = r32(is);
        std::string fname(len, '\0');
        is.read(fname.data(), len);
        if (!is || fname != name) throw ParseError("unexpected tensor in checkpoint");
        const std::uint32_t nd = r32(is);
        if (nd != t.shape.size()) throw ParseError("tensor rank mismatch in checkpoint");
        for (int d : t.shape)
            if (r32(is) != static_cast<std::uint32_t>(d))
                throw ParseError("tensor shape mismatch in checkpoint");
        for (float& x : t.v) x = rf32(is);
    });
}

void wstr(std::ostream& os, const std::string& s) {
    w32(os, static_cast<std::uint32_t>(s.size()));
    os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string rstr(std::istream& is) {
    const std::uint32_t len = r32(is);
    std::string s(len, '\0');
    is.read(s.data(), len);
    if (!is) throw ParseError("truncated checkpoint");
    return s;
}

std::ifstream open_checkpoint(const std::string& path, std::uint32_t* kind_out,
                              std::string* comment_out = nullptr) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open checkpoint: " + path);
    char magic[8];
    is.read(magic, 8);
    if (!is || std::memcmp(magic, kMagic, 8) != 0)
        throw ParseError("bad checkpoint magic");
    *kind_out = r32(is);
    std::string comment = rstr(is);
    if (comment_out) *comment_out = std::move(comment);
    return is;
}

}  // namespace

void save_checkpoint(const std::string& path, const PointNetParams<float>& p,
                     const std::string& comment) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot write checkpoint: " + path);
    os.write(kMagic, 8);
    w32(os, kCheckpointPointNet);
    wstr(os, comment);
    const PointNetConfig& c = p.cfg;
    w32(os, 9);
    for (int v : {c.h1, c.h2, c.feat, c.head, c.classes, c.use_tnet ? 1 : 0, c.t_h1, c.t_h2,
                  c.t_head})
        w32(os, static_cast<std::uint32_t>(v));
    write_tensors(os, p);
    if (!os) throw IoError("failed writing checkpoint: " + path);
}

void save_checkpoint(const std::string& path, const MvcnnParams<float>& p,
                     const std::string& comment) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot write checkpoint: " + path);
    os.write(kMagic, 8);
    w32(os, kCheckpointMvcnn);
    wstr(os, comment);
    const MvcnnConfig& c = p.cfg;
    w32(os, 6);
    for (int v : {c.side, c.conv1, c.conv2, c.kernel, c.feature, c.classes})
        w32(os, static_cast<std::uint32_t>(v));
    write_tensors(os, p);
    if (!os) throw IoError("failed writing checkpoint: " + path);
}

int checkpoint_kind(const std::string& path) {
    std::uint32_t kind = 0;
    open_checkpoint(path, &kind);
    if (kind != kCheckpointPointNet && kind != kCheckpointMvcnn)
        throw ParseError("unknown checkpoint kind");
    return static_cast<int>(kind);
}

std::string checkpoint_comment(const std::string& path) {
    std::uint32_t kind = 0;
    std::string comment;
    open_checkpoint(path, &kind, &comment);
    return comment;
}

PointNetParams<float> load_pointnet_checkpoint(const std::string& path) {
    std::uint32_t kind = 0;
    std::ifstream is = open_checkpoint(path, &kind);
    if (kind != kCheckpointPointNet)
        throw ParseError("checkpoint holds a different model kind");
    if (r32(is) != 9) throw ParseError("bad point-set checkpoint config length");
    PointNetConfig c;
    c.h1 = static_cast<int>(r32(is));
    c.h2 = static_cast<int>(r32(is));
    c.feat = static_cast<int>(r32(is));
    c.head = static_cast<int>(r32(is));
    c.classes = static_cast<int>(r32(is));
    c.use_tnet = r32(is) != 0;
    c.t_h1 = static_cast<int>(r32(is));
    c.t_h2 = static_cast<int>(r32(is));
    c.t_head = static_cast<int>(r32(is));
    PointNetParams<float> p = init_pointnet<float>(c, 0);
    read_tensors(is, p);
    return p;
}

MvcnnParams<float> load_mvcnn_checkpoint(const std::string& path) {
    std::uint32_t kind = 0;
    std::ifstream is = open_checkpoint(path, &kind);
    if (kind != kCheckpointMvcnn)
        throw ParseError("checkpoint holds a different model kind");
    if (r32(is) != 6) throw ParseError("bad multi-view checkpoint config length");
    MvcnnConfig c;
    c.side = static_cast<int>(r32(is));
    c.conv1 = static_cast<int>(r32(is));
    c.conv2 = static_cast<int>(r32(is));
    c.kernel = static_cast<int>(r32(is));
    c.feature = static_cast<int>(r32(is));
    c.classes = static_cast<int>(r32(is));
    MvcnnParams<float> p = init_mvcnn<float>(c, 0);
    read_tensors(is, p);
    return p;
}

}  // namespace fitrec
