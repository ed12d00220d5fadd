#include "hpser/classifier.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstring>
#include <limits>

#include <json.hpp>

#include "hpser/binio.hpp"
#include "hpser/checksum.hpp"

namespace hpser {

// ---------------------------------------------------------------------------
// Embeddings

EmbeddingVector pool_embed(const FeatureMap& map) {
    if (map.bands == 0 || map.frames == 0) throw GeometryMismatch("empty feature map");
    for (const auto& channel : map.channels)
        if (channel.size() != map.bands * map.frames)
            throw GeometryMismatch("channel size does not match map geometry");

    EmbeddingVector out(kEmbeddingDim, 0.0);
    for (size_t c = 0; c < 2; ++c) {
        const std::vector<float>& cells = map.channels[c];
        for (size_t wb = 0; wb < kPoolGrid; ++wb) {
            const size_t b0 = wb * map.bands / kPoolGrid;
            const size_t b1 = (wb + 1) * map.bands / kPoolGrid;
            for (size_t wf = 0; wf < kPoolGrid; ++wf) {
                const size_t f0 = wf * map.frames / kPoolGrid;
                const size_t f1 = (wf + 1) * map.frames / kPoolGrid;
                const size_t count = (b1 - b0) * (f1 - f0);
                double sum = 0.0;
                for (size_t b = b0; b < b1; ++b)
                    for (size_t f = f0; f < f1; ++f) sum += cells[b * map.frames + f];
                out[c * kPoolGrid * kPoolGrid + wb * kPoolGrid + wf] =
                    count == 0 ? 0.0 : sum / double(count);
            }
        }
    }
    return out;
}

namespace {
constexpr uint16_t kEmbeddingFormatVersion = 1;
constexpr uint16_t kModelFormatVersion = 1;
} // namespace

std::vector<uint8_t> encode_embeddings(std::span<const LabeledEmbedding> records) {
    ByteWriter w;
    w.text("EMB2");
    w.u16(kEmbeddingFormatVersion);
    w.u32(uint32_t(kEmbeddingDim));
    if (records.size() > std::numeric_limits<uint32_t>::max()) throw Error("too many records");
    w.u32(uint32_t(records.size()));
    for (const LabeledEmbedding& rec : records) {
        if (rec.values.size() != kEmbeddingDim)
            throw WrongDimension("embedding has " + std::to_string(rec.values.size()) +
                                 " values, expected " + std::to_string(kEmbeddingDim));
        w.u8(uint8_t(rec.label));
        for (double v : rec.values) w.f32(float(v));
    }
    w.u32(crc32(w.view()));
    return w.take();
}

std::vector<LabeledEmbedding> decode_embeddings(std::span<const uint8_t> bytes) {
    if (bytes.size() < 18) throw CorruptFile("file too small to be an embedding container");
    if (std::memcmp(bytes.data(), "EMB2", 4) != 0) throw CorruptFile("bad magic");
    const uint32_t stored = uint32_t(bytes[bytes.size() - 4]) |
                            uint32_t(bytes[bytes.size() - 3]) << 8 |
                            uint32_t(bytes[bytes.size() - 2]) << 16 |
                            uint32_t(bytes[bytes.size() - 1]) << 24;
    if (crc32(bytes.first(bytes.size() - 4)) != stored) throw CorruptFile("checksum mismatch");

    try {
        ByteReader r(bytes.first(bytes.size() - 4));
        r.skip(4);
        const uint16_t version = r.u16();
        if (version != kEmbeddingFormatVersion)
            throw VersionMismatch("embedding format version " + std::to_string(version));
        const uint32_t dim = r.u32();
        if (dim != kEmbeddingDim)
            throw WrongDimension("file declares dimension " + std::to_string(dim) +
                                 ", expected " + std::to_string(kEmbeddingDim));
        const uint32_t count = r.u32();
        std::vector<LabeledEmbedding> records;
        records.reserve(count);
        for (uint32_t i = 0; i < count; ++i) {
            LabeledEmbedding rec;
            const uint8_t label = r.u8();
            if (label >= kNumEmotions) throw CorruptFile("label ordinal out of range");
            rec.label = EmotionLabel(label);
            rec.values.resize(kEmbeddingDim);
            for (double& v : rec.values) {
                v = r.f32();
                if (!std::isfinite(v)) throw CorruptFile("non-finite embedding value");
            }
            records.push_back(std::move(rec));
        }
        if (!r.at_end()) throw CorruptFile("trailing bytes after the last record");
        return records;
    } catch (const TruncatedData&) {
        throw CorruptFile("embedding container ends mid-record");
    }
}

void export_embeddings(std::span<const LabeledEmbedding> records, const std::string& path) {
    write_file_bytes(path, encode_embeddings(records));
}

std::vector<LabeledEmbedding> import_embeddings(const std::string& path) {
    return decode_embeddings(read_file_bytes(path));
}

// ---------------------------------------------------------------------------
// Model construction and single-example forward

MlpModel make_mlp(std::vector<size_t> layer_sizes, std::vector<double> dropout_rates,
                  uint64_t seed, Activation activation) {
    if (layer_sizes.size() < 2) throw Error("need an input and an output layer");
    for (size_t s : layer_sizes)
        if (s == 0) throw Error("zero-width layer");
    if (dropout_rates.size() != layer_sizes.size() - 2)
        throw Error("need one dropout rate per hidden layer");
    for (double r : dropout_rates)
        if (!(r >= 0.0 && r < 1.0)) throw Error("dropout rate must be in [0, 1)");

    MlpModel m;
    m.layer_sizes = std::move(layer_sizes);
    m.dropout_rates = std::move(dropout_rates);
    m.activation = activation;
    m.seed = seed;

    const size_t L = m.layer_sizes.size() - 1;
    m.weights.resize(L);
    m.biases.resize(L);
    m.adam.m_w.resize(L);
    m.adam.v_w.resize(L);
    m.adam.m_b.resize(L);
    m.adam.v_b.resize(L);

    Rng rng(seed);
    for (size_t l = 0; l < L; ++l) {
        const size_t in = m.layer_sizes[l], out = m.layer_sizes[l + 1];
        const double bound = std::sqrt(6.0 / double(in));
        m.weights[l].resize(in * out);
        for (double& w : m.weights[l]) w = rng.uniform(-bound, bound);
        m.biases[l].assign(out, 0.0);
        m.adam.m_w[l].assign(in * out, 0.0);
        m.adam.v_w[l].assign(in * out, 0.0);
        m.adam.m_b[l].assign(out, 0.0);
        m.adam.v_b[l].assign(out, 0.0);
    }
    return m;
}

MlpModel make_emotion_mlp(uint64_t seed) {
    return make_mlp({kEmbeddingDim, 1024, 1024, 512, 512, kNumEmotions}, {0.5, 0.5, 0.3, 0.3},
                    seed);
}

namespace {

// Unrolled dot product; four independent accumulators keep the FMA chain
// from serializing.
double dot(const double* __restrict a, const double* __restrict b, size_t n) {
    double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
    size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        s0 += a[i] * b[i];
        s1 += a[i + 1] * b[i + 1];
        s2 += a[i + 2] * b[i + 2];
        s3 += a[i + 3] * b[i + 3];
    }
    for (; i < n; ++i) s0 += a[i] * b[i];
    return (s0 + s1) + (s2 + s3);
}

void softmax_in_place(double* z, size_t n) {
    double mx = z[0];
    for (size_t i = 1; i < n; ++i) mx = std::max(mx, z[i]);
    double sum = 0.0;
    for (size_t i = 0; i < n; ++i) {
        z[i] = std::exp(z[i] - mx);
        sum += z[i];
    }
    const double inv = 1.0 / sum;
    for (size_t i = 0; i < n; ++i) z[i] *= inv;
}

} // namespace

std::vector<double> forward(const MlpModel& model, std::span<const double> x, RunMode mode,
                            Rng* rng) {
    if (x.size() != model.input_dim())
        throw WrongDimension("input has " + std::to_string(x.size()) + " values, model expects " +
                             std::to_string(model.input_dim()));

    const size_t L = model.num_weight_layers();
    std::vector<double> cur(x.begin(), x.end());
    for (size_t l = 0; l < L; ++l) {
        const size_t in = model.layer_sizes[l], out = model.layer_sizes[l + 1];
        std::vector<double> z(out);
        for (size_t o = 0; o < out; ++o)
            z[o] = model.biases[l][o] + dot(model.weights[l].data() + o * in, cur.data(), in);

        if (l + 1 == L) {
            softmax_in_place(z.data(), out);
            return z;
        }
        if (model.activation == Activation::relu)
            for (double& v : z) v = v > 0.0 ? v : 0.0;
        const double rate = model.dropout_rates[l];
        if (mode == RunMode::train && rate > 0.0) {
            if (!rng) throw Error("training-mode forward needs an RNG for dropout");
            const double scale = 1.0 / (1.0 - rate);
            for (double& v : z) v *= rng->next_unit() < rate ? 0.0 : scale;
        }
        cur = std::move(z);
    }
    return cur; // unreachable: L >= 1
}

std::vector<double> forward(const MlpModel& model, std::span<const double> x) {
    return forward(model, x, RunMode::eval, nullptr);
}

EmotionLabel predict(const MlpModel& model, std::span<const double> x) {
    const std::vector<double> probs = forward(model, x);
    size_t best = 0;
    for (size_t i = 1; i < probs.size(); ++i)
        if (probs[i] > probs[best]) best = i;
    return EmotionLabel(best);
}

double batch_loss(const MlpModel& model, std::span<const LabeledEmbedding> batch) {
    if (batch.empty()) throw Error("empty batch");
    double loss = 0.0;
    for (const LabeledEmbedding& ex : batch) {
        const std::vector<double> probs = forward(model, ex.values);
        loss -= std::log(std::max(probs[size_t(ex.label)], 1e-300));
    }
    return loss / double(batch.size());
}

// ---------------------------------------------------------------------------
// Batched training kernels

namespace {

constexpr double kAdamBeta1 = 0.9;
constexpr double kAdamBeta2 = 0.999;
constexpr double kAdamEps = 1e-8;

void axpy(double* __restrict dst, const double* __restrict src, size_t n, double a) {
    for (size_t i = 0; i < n; ++i) dst[i] += a * src[i];
}

struct Matrix {
    size_t rows = 0, cols = 0;
    std::vector<double> v;

    void assign(size_t r, size_t c) {
        rows = r;
        cols = c;
        v.assign(r * c, 0.0);
    }
    double* row(size_t r) { return v.data() + r * cols; }
    const double* row(size_t r) const { return v.data() + r * cols; }
};

// C = A * W^T + bias. Runs as rank-1 updates against the transposed weights
// so the inner loops stay contiguous and vectorizable; the i-blocking keeps
// the active slice of wt in cache across the batch.
void affine_forward(const Matrix& A, const std::vector<double>& W, const std::vector<double>& bias,
                    size_t in, size_t out, Matrix& C, std::vector<double>& wt) {
    C.assign(A.rows, out);
    wt.resize(in * out);
    for (size_t o = 0; o < out; ++o)
        for (size_t i = 0; i < in; ++i) wt[i * out + o] = W[o * in + i];
    for (size_t b = 0; b < A.rows; ++b) std::copy(bias.begin(), bias.end(), C.row(b));

    constexpr size_t kBlock = 64;
    for (size_t i0 = 0; i0 < in; i0 += kBlock) {
        const size_t i1 = std::min(in, i0 + kBlock);
        for (size_t b = 0; b < A.rows; ++b) {
            const double* a = A.row(b);
            double* c = C.row(b);
            for (size_t i = i0; i < i1; ++i)
                if (a[i] != 0.0) axpy(c, wt.data() + i * out, out, a[i]);
        }
    }
}

// dA = dZ * W
void affine_backward_input(const Matrix& dZ, const std::vector<double>& W, size_t in, size_t out,
                           Matrix& dA) {
    dA.assign(dZ.rows, in);
    constexpr size_t kBlock = 32;
    for (size_t o0 = 0; o0 < out; o0 += kBlock) {
        const size_t o1 = std::min(out, o0 + kBlock);
        for (size_t b = 0; b < dZ.rows; ++b) {
            const double* dz = dZ.row(b);
            double* da = dA.row(b);
            for (size_t o = o0; o < o1; ++o)
                if (dz[o] != 0.0) axpy(da, W.data() + o * in, in, dz[o]);
        }
    }
}

// dW = dZ^T * A, db = column sums of dZ
void affine_backward_params(const Matrix& dZ, const Matrix& A, size_t in, size_t out,
                            std::vector<double>& dW, std::vector<double>& db) {
    dW.assign(out * in, 0.0);
    db.assign(out, 0.0);
    constexpr size_t kBlock = 32;
    for (size_t o0 = 0; o0 < out; o0 += kBlock) {
        const size_t o1 = std::min(out, o0 + kBlock);
        for (size_t b = 0; b < dZ.rows; ++b) {
            const double* dz = dZ.row(b);
            const double* a = A.row(b);
            for (size_t o = o0; o < o1; ++o) {
                db[o] += dz[o];
                if (dz[o] != 0.0) axpy(dW.data() + o * in, a, in, dz[o]);
            }
        }
    }
}

struct BatchBuffers {
    std::vector<Matrix> act;     // hidden activations, pre-dropout
    std::vector<Matrix> dropped; // hidden activations after dropout
    std::vector<Matrix> mask;    // per-element dropout scale, rows == 0 if unused
    Matrix probs;
    Matrix dz, da;
    std::vector<double> wt;
    std::vector<std::vector<double>> grad_w, grad_b;
};

// Forward + backward over one batch; fills bb.grad_* and returns the mean
// cross-entropy. Dropout masks (when enabled) are drawn row-major from rng.
double forward_backward(const MlpModel& m, const Matrix& X, std::span<const EmotionLabel> y,
                        bool use_dropout, Rng* rng, BatchBuffers& bb) {
    const size_t L = m.num_weight_layers();
    const size_t B = X.rows;
    bb.act.resize(L - 1);
    bb.dropped.resize(L - 1);
    bb.mask.resize(L - 1);
    bb.grad_w.resize(L);
    bb.grad_b.resize(L);

    const Matrix* cur = &X;
    for (size_t l = 0; l + 1 < L; ++l) {
        const size_t in = m.layer_sizes[l], out = m.layer_sizes[l + 1];
        affine_forward(*cur, m.weights[l], m.biases[l], in, out, bb.act[l], bb.wt);
        Matrix& a = bb.act[l];
        if (m.activation == Activation::relu)
            for (double& v : a.v) v = v > 0.0 ? v : 0.0;

        const double rate = m.dropout_rates[l];
        if (use_dropout && rate > 0.0) {
            if (!rng) throw Error("training-mode forward needs an RNG for dropout");
            bb.mask[l].assign(B, out);
            bb.dropped[l].assign(B, out);
            const double scale = 1.0 / (1.0 - rate);
            for (size_t i = 0; i < a.v.size(); ++i) {
                const double s = rng->next_unit() < rate ? 0.0 : scale;
                bb.mask[l].v[i] = s;
                bb.dropped[l].v[i] = a.v[i] * s;
            }
        } else {
            bb.mask[l].rows = 0;
            bb.dropped[l] = a;
        }
        cur = &bb.dropped[l];
    }

    const size_t out_dim = m.layer_sizes[L];
    affine_forward(*cur, m.weights[L - 1], m.biases[L - 1], m.layer_sizes[L - 1], out_dim,
                   bb.probs, bb.wt);
    double loss = 0.0;
    for (size_t b = 0; b < B; ++b) {
        double* row = bb.probs.row(b);
        softmax_in_place(row, out_dim);
        loss -= std::log(std::max(row[size_t(y[b])], 1e-300));
    }
    loss /= double(B);

    // Output delta: (probs - onehot) / B
    bb.dz = bb.probs;
    const double inv_b = 1.0 / double(B);
    for (size_t b = 0; b < B; ++b) {
        double* row = bb.dz.row(b);
        row[size_t(y[b])] -= 1.0;
        for (size_t o = 0; o < out_dim; ++o) row[o] *= inv_b;
    }

    for (size_t l = L; l-- > 0;) {
        const size_t in = m.layer_sizes[l], out = m.layer_sizes[l + 1];
        const Matrix& input = l == 0 ? X : bb.dropped[l - 1];
        affine_backward_params(bb.dz, input, in, out, bb.grad_w[l], bb.grad_b[l]);
        if (l == 0) break;

        affine_backward_input(bb.dz, m.weights[l], in, out, bb.da);
        const Matrix& prev = bb.act[l - 1];
        const bool has_mask = bb.mask[l - 1].rows != 0;
        bb.dz.assign(B, in);
        for (size_t i = 0; i < bb.da.v.size(); ++i) {
            double g = bb.da.v[i];
            if (has_mask) g *= bb.mask[l - 1].v[i];
            if (m.activation == Activation::relu && prev.v[i] <= 0.0) g = 0.0;
            bb.dz.v[i] = g;
        }
    }
    return loss;
}

void adam_update_group(std::vector<double>& w, std::vector<double>& m, std::vector<double>& v,
                       const std::vector<double>& g, double lr, double bc1, double bc2) {
    for (size_t i = 0; i < w.size(); ++i) {
        m[i] = kAdamBeta1 * m[i] + (1.0 - kAdamBeta1) * g[i];
        v[i] = kAdamBeta2 * v[i] + (1.0 - kAdamBeta2) * g[i] * g[i];
        w[i] -= lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + kAdamEps);
    }
}

void adam_apply(MlpModel& m, const BatchBuffers& bb, double lr) {
    m.adam.step += 1;
    const double bc1 = 1.0 - std::pow(kAdamBeta1, double(m.adam.step));
    const double bc2 = 1.0 - std::pow(kAdamBeta2, double(m.adam.step));
    for (size_t l = 0; l < m.num_weight_layers(); ++l) {
        adam_update_group(m.weights[l], m.adam.m_w[l], m.adam.v_w[l], bb.grad_w[l], lr, bc1, bc2);
        adam_update_group(m.biases[l], m.adam.m_b[l], m.adam.v_b[l], bb.grad_b[l], lr, bc1, bc2);
    }
}

void pack_batch(std::span<const LabeledEmbedding> set, std::span<const size_t> order, size_t from,
                size_t to, Matrix& X, std::vector<EmotionLabel>& y) {
    const size_t B = to - from;
    X.assign(B, set[0].values.size());
    y.resize(B);
    for (size_t b = 0; b < B; ++b) {
        const LabeledEmbedding& ex = set[order[from + b]];
        std::copy(ex.values.begin(), ex.values.end(), X.row(b));
        y[b] = ex.label;
    }
}

double accuracy(const MlpModel& model, std::span<const LabeledEmbedding> set) {
    if (set.empty()) return 0.0;
    size_t hits = 0;
    for (const LabeledEmbedding& ex : set)
        if (predict(model, ex.values) == ex.label) ++hits;
    return double(hits) / double(set.size());
}

} // namespace

// ---------------------------------------------------------------------------
// Training

FitTrace fit(MlpModel& model, std::span<const LabeledEmbedding> train_set,
             std::span<const LabeledEmbedding> val_set, const FitConfig& cfg, Rng& rng,
             MlpModel* best) {
    if (train_set.empty()) throw Error("empty training set");
    if (cfg.batch_size == 0) throw Error("batch size must be positive");
    for (const LabeledEmbedding& ex : train_set)
        if (ex.values.size() != model.input_dim())
            throw WrongDimension("training example dimension does not match the model");

    FitTrace trace;
    std::vector<size_t> order(train_set.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;

    BatchBuffers bb;
    Matrix X;
    std::vector<EmotionLabel> y;
    double best_val = -1.0;

    for (size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        rng.shuffle(order);
        for (size_t from = 0; from < order.size(); from += cfg.batch_size) {
            const size_t to = std::min(order.size(), from + cfg.batch_size);
            pack_batch(train_set, order, from, to, X, y);
            forward_backward(model, X, y, /*use_dropout=*/true, &rng, bb);
            adam_apply(model, bb, cfg.learning_rate);
        }
        trace.epochs_run = epoch + 1;

        if (cfg.track_train_loss) trace.train_loss.push_back(batch_loss(model, train_set));
        if (!val_set.empty()) {
            const double acc = accuracy(model, val_set);
            trace.val_accuracy.push_back(acc);
            if (acc > best_val) {
                best_val = acc;
                trace.best_epoch = epoch;
                if (best) *best = model;
            }
        }
        if (cfg.stop_at_full_train_accuracy && accuracy(model, train_set) == 1.0) break;
    }

    if (best && val_set.empty()) *best = model;
    return trace;
}

SplitIndices stratified_split(std::span<const EmotionLabel> labels, double train_fraction,
                              double val_fraction, double test_fraction, Rng& rng) {
    const double sum = train_fraction + val_fraction + test_fraction;
    if (!(train_fraction > 0.0 && val_fraction > 0.0 && test_fraction > 0.0))
        throw Error("split fractions must be positive");
    if (std::abs(sum - 1.0) > 1e-9) throw Error("split fractions must sum to 1");
    if (labels.empty()) throw Error("cannot split an empty dataset");

    std::vector<size_t> order(labels.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    rng.shuffle(order);

    std::array<std::vector<size_t>, kNumEmotions> per_class;
    for (size_t i : order) per_class[size_t(labels[i])].push_back(i);

    SplitIndices out;
    const double fracs[3] = {train_fraction, val_fraction, test_fraction};
    for (const auto& members : per_class) {
        if (members.empty()) continue;
        const size_t n = members.size();

        // Largest-remainder allocation; ties favor train, then val.
        size_t counts[3];
        double remainders[3];
        size_t assigned = 0;
        for (int p = 0; p < 3; ++p) {
            const double exact = fracs[p] * double(n);
            counts[p] = size_t(exact);
            remainders[p] = exact - double(counts[p]);
            assigned += counts[p];
        }
        for (size_t left = n - assigned; left > 0; --left) {
            int pick = 0;
            for (int p = 1; p < 3; ++p)
                if (remainders[p] > remainders[pick]) pick = p;
            ++counts[pick];
            remainders[pick] = -1.0;
        }

        size_t at = 0;
        for (size_t k = 0; k < counts[0]; ++k) out.train.push_back(members[at++]);
        for (size_t k = 0; k < counts[1]; ++k) out.val.push_back(members[at++]);
        for (size_t k = 0; k < counts[2]; ++k) out.test.push_back(members[at++]);
    }

    if (out.train.empty() || out.val.empty() || out.test.empty())
        throw EmptyPartition("a split fraction rounded a partition to zero examples");
    return out;
}

TrainResult train(std::span<const LabeledEmbedding> dataset, const TrainConfig& cfg,
                  std::span<const EmotionLabel> required_classes) {
    if (dataset.empty()) throw Error("empty dataset");
    for (const LabeledEmbedding& ex : dataset)
        if (ex.values.size() != kEmbeddingDim)
            throw WrongDimension("dataset embedding has " + std::to_string(ex.values.size()) +
                                 " values, expected " + std::to_string(kEmbeddingDim));

    std::vector<EmotionLabel> labels;
    labels.reserve(dataset.size());
    for (const LabeledEmbedding& ex : dataset) labels.push_back(ex.label);

    for (EmotionLabel cls : required_classes)
        if (std::find(labels.begin(), labels.end(), cls) == labels.end())
            throw MissingClass(std::string("class '") + to_string(cls) + "' has no examples");

    Rng rng(cfg.seed);
    SplitIndices split = stratified_split(labels, cfg.train_fraction, cfg.val_fraction,
                                          cfg.test_fraction, rng);

    // Oversample the training partition only.
    std::vector<EmotionLabel> train_labels;
    train_labels.reserve(split.train.size());
    for (size_t i : split.train) train_labels.push_back(labels[i]);
    const std::vector<size_t> picks = oversample_indices(train_labels, rng.next_u64());

    std::vector<LabeledEmbedding> train_set, val_set, test_set;
    train_set.reserve(picks.size());
    for (size_t p : picks) train_set.push_back(dataset[split.train[p]]);
    for (size_t i : split.val) val_set.push_back(dataset[i]);
    for (size_t i : split.test) test_set.push_back(dataset[i]);

    MlpModel model = make_emotion_mlp(rng.next_u64());
    MlpModel best = model;
    FitConfig fit_cfg;
    fit_cfg.learning_rate = cfg.learning_rate;
    fit_cfg.batch_size = cfg.batch_size;
    fit_cfg.epochs = cfg.epochs;
    const FitTrace trace = fit(model, train_set, val_set, fit_cfg, rng, &best);

    TrainResult result;
    result.report = evaluate(best, test_set);
    result.model = std::move(best);
    result.best_epoch = trace.best_epoch;
    result.best_val_accuracy =
        trace.val_accuracy.empty() ? 0.0 : *std::max_element(trace.val_accuracy.begin(),
                                                             trace.val_accuracy.end());
    return result;
}

// ---------------------------------------------------------------------------
// Evaluation and reports

EvalReport evaluate(const MlpModel& model, std::span<const LabeledEmbedding> test_set) {
    if (test_set.empty()) throw Error("empty test set");

    std::array<std::array<size_t, kNumEmotions>, kNumEmotions> counts{};
    for (const LabeledEmbedding& ex : test_set)
        ++counts[size_t(ex.label)][size_t(predict(model, ex.values))];

    EvalReport report;
    report.total = test_set.size();
    size_t correct = 0;
    for (size_t c = 0; c < kNumEmotions; ++c) {
        size_t row_total = 0;
        for (size_t p = 0; p < kNumEmotions; ++p) row_total += counts[c][p];
        report.class_counts[c] = row_total;
        correct += counts[c][c];
        if (row_total == 0) continue; // row stays all-zero
        for (size_t p = 0; p < kNumEmotions; ++p)
            report.confusion[c][p] = 100.0 * double(counts[c][p]) / double(row_total);
        report.per_class_accuracy[c] = double(counts[c][c]) / double(row_total);
    }
    report.overall_accuracy = double(correct) / double(report.total);
    return report;
}

namespace {

const char* kDisplayNames[kNumEmotions] = {"Anger",     "Boredom", "Disgust", "Fear",
                                           "Happiness", "Neutral", "Sadness"};

// Locale-independent fixed-point formatting.
std::string format_fixed(double v, int precision) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::fixed, precision);
    if (ec != std::errc()) return "0";
    return std::string(buf, ptr);
}

} // namespace

std::string report_csv(const EvalReport& report) {
    std::string out = "Emotion";
    for (const char* name : kDisplayNames) {
        out += ',';
        out += name;
    }
    out += '\n';
    for (size_t c = 0; c < kNumEmotions; ++c) {
        out += kDisplayNames[c];
        for (size_t p = 0; p < kNumEmotions; ++p) {
            out += ',';
            out += format_fixed(report.confusion[c][p], 2);
        }
        out += '\n';
    }
    return out;
}

std::string report_json(const EvalReport& report) {
    nlohmann::json j;
    j["total"] = report.total;
    j["overall_accuracy"] = report.overall_accuracy;
    for (size_t c = 0; c < kNumEmotions; ++c) {
        const char* name = to_string(EmotionLabel(c));
        j["class_counts"][name] = report.class_counts[c];
        j["per_class_accuracy"][name] = report.per_class_accuracy[c];
        j["confusion_percent"][name] = report.confusion[c];
    }
    return j.dump(2) + "\n";
}

// ---------------------------------------------------------------------------
// Gradient check

namespace {

std::vector<size_t> sample_indices(size_t count, size_t want, Rng& rng) {
    std::vector<size_t> out;
    if (count <= want) {
        out.resize(count);
        for (size_t i = 0; i < count; ++i) out[i] = i;
        return out;
    }
    while (out.size() < want) {
        const size_t candidate = size_t(rng.next_below(count));
        if (std::find(out.begin(), out.end(), candidate) == out.end()) out.push_back(candidate);
    }
    return out;
}

} // namespace

double gradient_check(const MlpModel& model, std::span<const LabeledEmbedding> batch,
                      const GradCheckOptions& options) {
    if (batch.empty()) throw Error("gradient check needs a non-empty batch");

    MlpModel m = model;
    Matrix X;
    std::vector<EmotionLabel> y;
    std::vector<size_t> order(batch.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    pack_batch(batch, order, 0, batch.size(), X, y);

    BatchBuffers bb;
    forward_backward(m, X, y, /*use_dropout=*/false, nullptr, bb);

    if (options.flip_sign_of_layer >= 0 &&
        size_t(options.flip_sign_of_layer) < m.num_weight_layers()) {
        for (double& g : bb.grad_w[size_t(options.flip_sign_of_layer)]) g = -g;
        for (double& g : bb.grad_b[size_t(options.flip_sign_of_layer)]) g = -g;
    }

    Rng rng(options.seed);
    double worst = 0.0;
    for (size_t l = 0; l < m.num_weight_layers(); ++l) {
        for (int group = 0; group < 2; ++group) {
            std::vector<double>& params = group == 0 ? m.weights[l] : m.biases[l];
            const std::vector<double>& grads = group == 0 ? bb.grad_w[l] : bb.grad_b[l];
            for (size_t i : sample_indices(params.size(), options.samples_per_group, rng)) {
                const double orig = params[i];
                params[i] = orig + options.step;
                const double lp = batch_loss(m, batch);
                params[i] = orig - options.step;
                const double lm = batch_loss(m, batch);
                params[i] = orig;
                const double gn = (lp - lm) / (2.0 * options.step);
                const double ga = grads[i];
                const double rel = std::abs(ga - gn) / std::max(std::abs(ga) + std::abs(gn), 1e-4);
                worst = std::max(worst, rel);
            }
        }
    }
    return worst;
}

// ---------------------------------------------------------------------------
// Checkpoints

std::vector<uint8_t> encode_model(const MlpModel& model) {
    ByteWriter w;
    w.text("MLPC");
    w.u16(kModelFormatVersion);
    w.u8(uint8_t(model.activation));
    w.u32(uint32_t(model.layer_sizes.size()));
    for (size_t s : model.layer_sizes) w.u32(uint32_t(s));
    for (double r : model.dropout_rates) w.f64(r);
    for (size_t l = 0; l < model.num_weight_layers(); ++l) {
        for (double v : model.weights[l]) w.f64(v);
        for (double v : model.biases[l]) w.f64(v);
    }
    w.u64(model.adam.step);
    for (size_t l = 0; l < model.num_weight_layers(); ++l) {
        for (double v : model.adam.m_w[l]) w.f64(v);
        for (double v : model.adam.v_w[l]) w.f64(v);
        for (double v : model.adam.m_b[l]) w.f64(v);
        for (double v : model.adam.v_b[l]) w.f64(v);
    }
    w.u64(model.seed);
    w.u32(crc32(w.view()));
    return w.take();
}

MlpModel decode_model(std::span<const uint8_t> bytes) {
    if (bytes.size() < 15) throw CorruptFile("file too small to be a checkpoint");
    if (std::memcmp(bytes.data(), "MLPC", 4) != 0) throw CorruptFile("bad magic");
    const uint32_t stored = uint32_t(bytes[bytes.size() - 4]) |
                            uint32_t(bytes[bytes.size() - 3]) << 8 |
                            uint32_t(bytes[bytes.size() - 2]) << 16 |
                            uint32_t(bytes[bytes.size() - 1]) << 24;
    if (crc32(bytes.first(bytes.size() - 4)) != stored) throw CorruptFile("checksum mismatch");

    try {
        ByteReader r(bytes.first(bytes.size() - 4));
        r.skip(4);
        const uint16_t version = r.u16();
        if (version != kModelFormatVersion)
            throw VersionMismatch("checkpoint version " + std::to_string(version));
        const uint8_t act = r.u8();
        if (act > 1) throw CorruptFile("unknown activation code");

        const uint32_t num_sizes = r.u32();
        if (num_sizes < 2 || num_sizes > 64) throw CorruptFile("implausible layer count");
        std::vector<size_t> sizes(num_sizes);
        uint64_t total_params = 0;
        for (size_t i = 0; i < num_sizes; ++i) {
            sizes[i] = r.u32();
            if (sizes[i] == 0 || sizes[i] > (1u << 24)) throw CorruptFile("implausible layer width");
            if (i > 0) total_params += uint64_t(sizes[i - 1]) * sizes[i] + sizes[i];
        }
        if (total_params > (1ull << 31)) throw CorruptFile("implausible parameter count");

        MlpModel m = make_mlp(sizes, std::vector<double>(num_sizes - 2, 0.0), 0,
                              Activation(act));
        for (double& rate : m.dropout_rates) {
            rate = r.f64();
            if (!(rate >= 0.0 && rate < 1.0)) throw CorruptFile("dropout rate out of range");
        }
        for (size_t l = 0; l < m.num_weight_layers(); ++l) {
            for (double& v : m.weights[l]) v = r.f64();
            for (double& v : m.biases[l]) v = r.f64();
        }
        m.adam.step = r.u64();
        for (size_t l = 0; l < m.num_weight_layers(); ++l) {
            for (double& v : m.adam.m_w[l]) v = r.f64();
            for (double& v : m.adam.v_w[l]) v = r.f64();
            for (double& v : m.adam.m_b[l]) v = r.f64();
            for (double& v : m.adam.v_b[l]) v = r.f64();
        }
        m.seed = r.u64();
        if (!r.at_end()) throw CorruptFile("trailing bytes after the checkpoint payload");
        return m;
    } catch (const TruncatedData&) {
        throw CorruptFile("checkpoint ends mid-record");
    }
}

void save_model(const MlpModel& model, const std::string& path) {
    write_file_bytes(path, encode_model(model));
}

MlpModel load_model(const std::string& path) { return decode_model(read_file_bytes(path)); }

} // namespace hpser
