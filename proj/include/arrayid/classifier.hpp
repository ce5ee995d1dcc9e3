#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "arrayid/audio.hpp"
#include "arrayid/dsp.hpp"
#include "arrayid/rng.hpp"
#include "arrayid/util.hpp"

namespace arrayid::classifier {

struct Sample {
    std::vector<double> x;
    audio::Label label = audio::Label::authentic;
};

struct TrainOptions {
    std::uint64_t seed = 1;
    double val_fraction = 0.3;
    double learning_rate = 1e-3;
    int batch_size = 32;
    int max_epochs = 500;
    int patience = 25;            // early-stopping epochs without val-loss improvement
    double min_val_accuracy = 0.7;  // below this, training is declared diverged
    std::vector<int> hidden_sizes{64, 32, 16};

    void validate() const {
        if (!(val_fraction > 0.0 && val_fraction < 1.0))
            throw std::invalid_argument("train options: val_fraction must lie in (0,1)");
        if (!(learning_rate > 0.0))
            throw std::invalid_argument("train options: learning rate must be positive");
        if (batch_size < 1 || max_epochs < 1 || patience < 1)
            throw std::invalid_argument("train options: counts must be positive");
        if (min_val_accuracy < 0.0 || min_val_accuracy > 1.0)
            throw std::invalid_argument("train options: min_val_accuracy must lie in [0,1]");
        for (int h : hidden_sizes)
            if (h < 1) throw std::invalid_argument("train options: hidden sizes must be positive");
    }
};

struct Scaler {
    std::vector<double> mean;
    std::vector<double> stdev;  // constant features get 1 so standardization is a no-op

    std::vector<double> apply(const std::vector<double>& x) const {
        std::vector<double> out(x.size());
        for (std::size_t i = 0; i < x.size(); ++i) out[i] = (x[i] - mean[i]) / stdev[i];
        return out;
    }
};

struct Layer {
    dsp::Mat w;  // out_dim x in_dim, row-major
    std::vector<double> b;
};

struct Model {
    int version = 1;
    std::uint64_t config_hash = 0;  // extraction recipe this model was trained on
    Scaler scaler;
    std::vector<Layer> layers;
    double threshold = 0.5;  // authentic iff score >= threshold

    std::size_t input_size() const { return layers.empty() ? 0 : layers.front().w.cols; }

    void validate() const {
        if (layers.empty()) throw std::runtime_error("model: no layers");
        if (scaler.mean.size() != input_size() || scaler.stdev.size() != input_size())
            throw std::runtime_error("model: scaler size does not match the input layer");
        for (double s : scaler.stdev)
            if (!(s > 0.0) || !std::isfinite(s))
                throw std::runtime_error("model: scaler stdev entries must be positive");
        for (double m : scaler.mean)
            if (!std::isfinite(m)) throw std::runtime_error("model: non-finite scaler mean");
        std::size_t in = input_size();
        for (const auto& l : layers) {
            if (l.w.rows == 0 || l.w.cols != in)
                throw std::runtime_error("model: inconsistent layer shapes");
            if (l.b.size() != l.w.rows) throw std::runtime_error("model: bias size mismatch");
            for (double v : l.w.a)
                if (!std::isfinite(v)) throw std::runtime_error("model: non-finite weight");
            for (double v : l.b)
                if (!std::isfinite(v)) throw std::runtime_error("model: non-finite bias");
            in = l.w.rows;
        }
        if (layers.back().w.rows != 1)
            throw std::runtime_error("model: output layer must have one unit");
        if (!(threshold > 0.0 && threshold < 1.0))
            throw std::runtime_error("model: threshold must lie in (0,1)");
    }

    // P(authentic): standardize, rectified-linear hidden layers, logistic output.
    double score(const std::vector<double>& x) const {
        if (x.size() != input_size())
            throw std::invalid_argument("model: expected " + std::to_string(input_size()) +
                                        " features, got " + std::to_string(x.size()));
        std::vector<double> cur = scaler.apply(x);
        std::vector<double> next;
        for (std::size_t li = 0; li < layers.size(); ++li) {
            const Layer& l = layers[li];
            next.assign(l.w.rows, 0.0);
            for (std::size_t o = 0; o < l.w.rows; ++o) {
                double acc = l.b[o];
                const double* row = &l.w.a[o * l.w.cols];
                for (std::size_t i = 0; i < l.w.cols; ++i) acc += row[i] * cur[i];
                next[o] = (li + 1 == layers.size()) ? 1.0 / (1.0 + std::exp(-acc))
                                                    : std::max(0.0, acc);
            }
            cur.swap(next);
        }
        return cur[0];
    }
};

struct Prediction {
    double score = 0.0;
    audio::Label label = audio::Label::spoof;
};

inline Prediction predict(const Model& m, const std::vector<double>& x,
                          std::uint64_t feature_config_hash) {
    if (feature_config_hash != m.config_hash)
        throw std::runtime_error(
            "model was trained under a different feature configuration (hash mismatch)");
    Prediction p;
    p.score = m.score(x);
    p.label = p.score >= m.threshold ? audio::Label::authentic : audio::Label::spoof;
    return p;
}

// ---------------------------------------------------------------------------
// Equal error rate
// ---------------------------------------------------------------------------

struct EerPoint {
    double eer = 0.0;
    double threshold = 0.0;
};

// Sweeps every distinct score (plus a beyond-max sentinel) as a threshold and
// linearly interpolates the FAR/FRR crossing. Decision rule: authentic iff
// score >= threshold, so FAR falls and FRR rises as the threshold grows.
inline EerPoint eer_point(std::vector<double> authentic, std::vector<double> spoof) {
    if (authentic.empty() || spoof.empty())
        throw std::invalid_argument("eer: both classes required");
    std::sort(authentic.begin(), authentic.end());
    std::sort(spoof.begin(), spoof.end());

    std::vector<double> cand;
    cand.reserve(authentic.size() + spoof.size() + 1);
    std::merge(authentic.begin(), authentic.end(), spoof.begin(), spoof.end(),
               std::back_inserter(cand));
    cand.erase(std::unique(cand.begin(), cand.end()), cand.end());
    cand.push_back(cand.back() + 1.0);

    const double na = static_cast<double>(authentic.size());
    const double ns = static_cast<double>(spoof.size());
    auto far_at = [&](double t) {
        return static_cast<double>(spoof.end() -
                                   std::lower_bound(spoof.begin(), spoof.end(), t)) /
               ns;
    };
    auto frr_at = [&](double t) {
        return static_cast<double>(std::lower_bound(authentic.begin(), authentic.end(), t) -
                                   authentic.begin()) /
               na;
    };

    double t1 = cand.front();
    double f1 = far_at(t1), r1 = frr_at(t1);
    for (std::size_t i = 1; i < cand.size(); ++i) {
        const double t2 = cand[i];
        const double f2 = far_at(t2), r2 = frr_at(t2);
        const double d1 = f1 - r1, d2 = f2 - r2;
        if (d2 <= 0.0) {
            const double lambda = (d1 - d2) != 0.0 ? d1 / (d1 - d2) : 0.0;
            return {(1.0 - lambda) * f1 + lambda * f2, (1.0 - lambda) * t1 + lambda * t2};
        }
        t1 = t2;
        f1 = f2;
        r1 = r2;
    }
    // at the sentinel FAR = 0 and FRR = 1, so the loop always returns
    throw std::logic_error("eer: FAR/FRR crossing not found");
}

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

struct RocPoint {
    double threshold = 0.0;
    double far = 0.0;
    double frr = 0.0;
};

struct EvaluationReport {
    double accuracy = 0.0;
    double far = 0.0;   // NaN when no spoof rows
    double frr = 0.0;   // NaN when no authentic rows
    double trr = 0.0;   // 1 - far
    double eer = 0.0;   // NaN when either class is missing
    std::size_t tp = 0, tn = 0, fp = 0, fn = 0;
    double threshold_used = 0.5;
    bool single_class = false;
    std::vector<RocPoint> roc;  // empty when single_class
};

inline EvaluationReport evaluate(const Model& m, const std::vector<Sample>& rows,
                                 std::uint64_t feature_config_hash) {
    if (rows.empty()) throw std::invalid_argument("evaluate: no rows");
    const double nan = std::numeric_limits<double>::quiet_NaN();

    std::vector<double> auth_scores, spoof_scores;
    EvaluationReport rep;
    rep.threshold_used = m.threshold;
    for (const auto& s : rows) {
        const Prediction p = predict(m, s.x, feature_config_hash);
        const bool accepted = p.label == audio::Label::authentic;
        if (s.label == audio::Label::authentic) {
            auth_scores.push_back(p.score);
            accepted ? ++rep.tp : ++rep.fn;
        } else {
            spoof_scores.push_back(p.score);
            accepted ? ++rep.fp : ++rep.tn;
        }
    }

    rep.accuracy = static_cast<double>(rep.tp + rep.tn) / static_cast<double>(rows.size());
    rep.far = spoof_scores.empty()
                  ? nan
                  : static_cast<double>(rep.fp) / static_cast<double>(spoof_scores.size());
    rep.frr = auth_scores.empty()
                  ? nan
                  : static_cast<double>(rep.fn) / static_cast<double>(auth_scores.size());
    rep.trr = 1.0 - rep.far;
    rep.single_class = auth_scores.empty() || spoof_scores.empty();
    if (rep.single_class) {
        rep.eer = nan;
        return rep;
    }

    const EerPoint e = eer_point(auth_scores, spoof_scores);
    rep.eer = e.eer;

    std::sort(auth_scores.begin(), auth_scores.end());
    std::sort(spoof_scores.begin(), spoof_scores.end());
    std::vector<double> cand;
    cand.reserve(rows.size() + 1);
    std::merge(auth_scores.begin(), auth_scores.end(), spoof_scores.begin(), spoof_scores.end(),
               std::back_inserter(cand));
    cand.erase(std::unique(cand.begin(), cand.end()), cand.end());
    cand.push_back(cand.back() + 1.0);
    for (double t : cand) {
        RocPoint p;
        p.threshold = t;
        p.far = static_cast<double>(spoof_scores.end() - std::lower_bound(spoof_scores.begin(),
                                                                          spoof_scores.end(), t)) /
                static_cast<double>(spoof_scores.size());
        p.frr = static_cast<double>(std::lower_bound(auth_scores.begin(), auth_scores.end(), t) -
                                    auth_scores.begin()) /
                static_cast<double>(auth_scores.size());
        rep.roc.push_back(p);
    }
    return rep;
}

inline nlohmann::json report_to_json(const EvaluationReport& r) {
    auto num = [](double v) {
        return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr);
    };
    return nlohmann::json{{"accuracy", num(r.accuracy)},
                          {"far", num(r.far)},
                          {"frr", num(r.frr)},
                          {"trr", num(r.trr)},
                          {"eer", num(r.eer)},
                          {"tp", r.tp},
                          {"tn", r.tn},
                          {"fp", r.fp},
                          {"fn", r.fn},
                          {"threshold_used", r.threshold_used},
                          {"single_class", r.single_class},
                          {"n_rows", r.tp + r.tn + r.fp + r.fn}};
}

inline std::string roc_to_csv(const EvaluationReport& r) {
    std::string out = "threshold,far,frr\n";
    for (const auto& p : r.roc) {
        out += format_double(p.threshold);
        out += ',';
        out += format_double(p.far);
        out += ',';
        out += format_double(p.frr);
        out += '\n';
    }
    return out;
}

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

struct TrainReport {
    double val_loss = 0.0;
    double val_accuracy = 0.0;
    double val_eer = 0.0;
    double threshold = 0.5;
    int epochs_run = 0;
    int best_epoch = 0;
    std::size_t n_train = 0;
    std::size_t n_val = 0;
};

inline nlohmann::json report_to_json(const TrainReport& r) {
    return nlohmann::json{{"val_loss", r.val_loss},         {"val_accuracy", r.val_accuracy},
                          {"val_eer", r.val_eer},           {"threshold", r.threshold},
                          {"epochs_run", r.epochs_run},     {"best_epoch", r.best_epoch},
                          {"n_train", r.n_train},           {"n_val", r.n_val}};
}

namespace detail {

struct Workspace {
    std::vector<std::vector<double>> act;    // act[0] = input, act[l+1] = layer l output
    std::vector<std::vector<double>> delta;  // per-layer error terms
};

inline double forward(const std::vector<Layer>& layers, const std::vector<double>& x,
                      Workspace& ws) {
    ws.act.resize(layers.size() + 1);
    ws.act[0] = x;
    for (std::size_t li = 0; li < layers.size(); ++li) {
        const Layer& l = layers[li];
        auto& out = ws.act[li + 1];
        out.assign(l.w.rows, 0.0);
        const auto& in = ws.act[li];
        for (std::size_t o = 0; o < l.w.rows; ++o) {
            double acc = l.b[o];
            const double* row = &l.w.a[o * l.w.cols];
            for (std::size_t i = 0; i < l.w.cols; ++i) acc += row[i] * in[i];
            out[o] = (li + 1 == layers.size()) ? 1.0 / (1.0 + std::exp(-acc))
                                               : std::max(0.0, acc);
        }
    }
    return ws.act.back()[0];
}

inline double bce(double score, double y) {
    const double s = std::clamp(score, 1e-12, 1.0 - 1e-12);
    return -(y * std::log(s) + (1.0 - y) * std::log(1.0 - s));
}

}  // namespace detail

// Deterministic mini-batch training: binary cross-entropy, adaptive-moment
// updates, early stopping on validation loss with best-weight restore, and a
// decision threshold placed at the validation equal-error point.
inline Model train(const std::vector<Sample>& data, std::uint64_t feature_config_hash,
                   const TrainOptions& opt = {}, TrainReport* out_report = nullptr) {
    opt.validate();
    if (data.empty()) throw std::invalid_argument("train: no samples");
    const std::size_t dim = data[0].x.size();
    if (dim == 0) throw std::invalid_argument("train: empty feature vectors");

    std::vector<std::size_t> auth_idx, spoof_idx;
    for (std::size_t i = 0; i < data.size(); ++i) {
        if (data[i].x.size() != dim)
            throw std::invalid_argument("train: inconsistent feature dimensions");
        for (double v : data[i].x)
            if (!std::isfinite(v)) throw std::invalid_argument("train: non-finite feature value");
        (data[i].label == audio::Label::authentic ? auth_idx : spoof_idx).push_back(i);
    }
    if (auth_idx.size() < 20 || spoof_idx.size() < 20)
        throw std::invalid_argument("train: need at least 20 rows per class, got " +
                                    std::to_string(auth_idx.size()) + " authentic / " +
                                    std::to_string(spoof_idx.size()) + " spoof");

    Rng rng(opt.seed);
    auto shuffle = [&rng](std::vector<std::size_t>& v) {
        for (std::size_t i = v.size(); i > 1; --i)
            std::swap(v[i - 1], v[rng.uniform_index(i)]);
    };

    // stratified validation split
    shuffle(auth_idx);
    shuffle(spoof_idx);
    const auto split = [&](const std::vector<std::size_t>& idx) {
        const std::size_t n_val = std::max<std::size_t>(
            1, static_cast<std::size_t>(static_cast<double>(idx.size()) * opt.val_fraction));
        return std::pair{std::vector<std::size_t>(idx.begin() + static_cast<std::ptrdiff_t>(n_val),
                                                  idx.end()),
                         std::vector<std::size_t>(idx.begin(),
                                                  idx.begin() + static_cast<std::ptrdiff_t>(n_val))};
    };
    const auto [auth_train, auth_val] = split(auth_idx);
    const auto [spoof_train, spoof_val] = split(spoof_idx);

    std::vector<std::size_t> train_idx = auth_train;
    train_idx.insert(train_idx.end(), spoof_train.begin(), spoof_train.end());
    std::vector<std::size_t> val_idx = auth_val;
    val_idx.insert(val_idx.end(), spoof_val.begin(), spoof_val.end());

    // per-feature standardization fitted on the training split only
    Scaler scaler;
    scaler.mean.assign(dim, 0.0);
    scaler.stdev.assign(dim, 0.0);
    for (std::size_t i : train_idx)
        for (std::size_t f = 0; f < dim; ++f) scaler.mean[f] += data[i].x[f];
    for (double& m : scaler.mean) m /= static_cast<double>(train_idx.size());
    for (std::size_t i : train_idx)
        for (std::size_t f = 0; f < dim; ++f) {
            const double d = data[i].x[f] - scaler.mean[f];
            scaler.stdev[f] += d * d;
        }
    for (double& s : scaler.stdev) {
        s = std::sqrt(s / static_cast<double>(train_idx.size()));
        if (!(s > 0.0)) s = 1.0;
    }

    std::vector<std::vector<double>> train_x, val_x;
    std::vector<double> train_y, val_y;
    for (std::size_t i : train_idx) {
        train_x.push_back(scaler.apply(data[i].x));
        train_y.push_back(data[i].label == audio::Label::authentic ? 1.0 : 0.0);
    }
    for (std::size_t i : val_idx) {
        val_x.push_back(scaler.apply(data[i].x));
        val_y.push_back(data[i].label == audio::Label::authentic ? 1.0 : 0.0);
    }

    // network setup; scaled-normal init, zero biases
    std::vector<Layer> layers;
    std::size_t in_dim = dim;
    for (std::size_t li = 0; li <= opt.hidden_sizes.size(); ++li) {
        const std::size_t out_dim =
            li < opt.hidden_sizes.size() ? static_cast<std::size_t>(opt.hidden_sizes[li]) : 1;
        Layer l;
        l.w = dsp::Mat(out_dim, in_dim, 0.0);
        const double scale = li < opt.hidden_sizes.size()
                                 ? std::sqrt(2.0 / static_cast<double>(in_dim))
                                 : std::sqrt(1.0 / static_cast<double>(in_dim));
        for (double& v : l.w.a) v = scale * rng.normal();
        l.b.assign(out_dim, 0.0);
        layers.push_back(std::move(l));
        in_dim = out_dim;
    }

    // adaptive-moment state
    struct Moments {
        dsp::Mat mw, vw;
        std::vector<double> mb, vb;
    };
    std::vector<Moments> mom(layers.size());
    std::vector<Layer> grad(layers.size());
    for (std::size_t li = 0; li < layers.size(); ++li) {
        mom[li].mw = dsp::Mat(layers[li].w.rows, layers[li].w.cols, 0.0);
        mom[li].vw = dsp::Mat(layers[li].w.rows, layers[li].w.cols, 0.0);
        mom[li].mb.assign(layers[li].b.size(), 0.0);
        mom[li].vb.assign(layers[li].b.size(), 0.0);
        grad[li].w = dsp::Mat(layers[li].w.rows, layers[li].w.cols, 0.0);
        grad[li].b.assign(layers[li].b.size(), 0.0);
    }

    constexpr double kBeta1 = 0.9, kBeta2 = 0.999, kEps = 1e-8;
    long long step = 0;
    detail::Workspace ws;
    ws.delta.resize(layers.size());

    auto val_loss_fn = [&]() {
        double loss = 0.0;
        for (std::size_t i = 0; i < val_x.size(); ++i)
            loss += detail::bce(detail::forward(layers, val_x[i], ws), val_y[i]);
        return loss / static_cast<double>(val_x.size());
    };

    double best_loss = std::numeric_limits<double>::infinity();
    std::vector<Layer> best_layers = layers;
    int best_epoch = 0;
    int stale = 0;
    int epochs_run = 0;

    std::vector<std::size_t> order(train_x.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    for (int epoch = 1; epoch <= opt.max_epochs; ++epoch) {
        epochs_run = epoch;
        shuffle(order);
        for (std::size_t start = 0; start < order.size();
             start += static_cast<std::size_t>(opt.batch_size)) {
            const std::size_t end =
                std::min(order.size(), start + static_cast<std::size_t>(opt.batch_size));
            const double inv_batch = 1.0 / static_cast<double>(end - start);
            for (auto& g : grad) {
                std::fill(g.w.a.begin(), g.w.a.end(), 0.0);
                std::fill(g.b.begin(), g.b.end(), 0.0);
            }

            for (std::size_t bi = start; bi < end; ++bi) {
                const std::size_t si = order[bi];
                const double score = detail::forward(layers, train_x[si], ws);
                // output error for logistic + cross-entropy
                ws.delta.back().assign(1, (score - train_y[si]) * inv_batch);
                for (std::size_t li = layers.size(); li-- > 0;) {
                    const auto& d = ws.delta[li];
                    const auto& in = ws.act[li];
                    auto& g = grad[li];
                    for (std::size_t o = 0; o < g.w.rows; ++o) {
                        const double dv = d[o];
                        if (dv == 0.0) continue;
                        double* grow = &g.w.a[o * g.w.cols];
                        for (std::size_t i = 0; i < g.w.cols; ++i) grow[i] += dv * in[i];
                        g.b[o] += dv;
                    }
                    if (li == 0) break;
                    auto& dprev = ws.delta[li - 1];
                    dprev.assign(layers[li].w.cols, 0.0);
                    for (std::size_t o = 0; o < layers[li].w.rows; ++o) {
                        const double dv = d[o];
                        if (dv == 0.0) continue;
                        const double* row = &layers[li].w.a[o * layers[li].w.cols];
                        for (std::size_t i = 0; i < layers[li].w.cols; ++i)
                            dprev[i] += dv * row[i];
                    }
                    // rectified-linear derivative: zero where the unit was off
                    const auto& a = ws.act[li];
                    for (std::size_t i = 0; i < dprev.size(); ++i)
                        if (a[i] <= 0.0) dprev[i] = 0.0;
                }
            }

            ++step;
            const double c1 = 1.0 - std::pow(kBeta1, static_cast<double>(step));
            const double c2 = 1.0 - std::pow(kBeta2, static_cast<double>(step));
            for (std::size_t li = 0; li < layers.size(); ++li) {
                auto& l = layers[li];
                auto& g = grad[li];
                auto& mo = mom[li];
                for (std::size_t i = 0; i < l.w.a.size(); ++i) {
                    mo.mw.a[i] = kBeta1 * mo.mw.a[i] + (1.0 - kBeta1) * g.w.a[i];
                    mo.vw.a[i] = kBeta2 * mo.vw.a[i] + (1.0 - kBeta2) * g.w.a[i] * g.w.a[i];
                    l.w.a[i] -= opt.learning_rate * (mo.mw.a[i] / c1) /
                                (std::sqrt(mo.vw.a[i] / c2) + kEps);
                }
                for (std::size_t i = 0; i < l.b.size(); ++i) {
                    mo.mb[i] = kBeta1 * mo.mb[i] + (1.0 - kBeta1) * g.b[i];
                    mo.vb[i] = kBeta2 * mo.vb[i] + (1.0 - kBeta2) * g.b[i] * g.b[i];
                    l.b[i] -= opt.learning_rate * (mo.mb[i] / c1) /
                              (std::sqrt(mo.vb[i] / c2) + kEps);
                }
            }
        }

        const double vloss = val_loss_fn();
        if (vloss < best_loss) {
            best_loss = vloss;
            best_layers = layers;
            best_epoch = epoch;
            stale = 0;
        } else if (++stale >= opt.patience) {
            break;
        }
    }

    Model model;
    model.config_hash = feature_config_hash;
    model.scaler = std::move(scaler);
    model.layers = std::move(best_layers);

    // operating point: validation equal-error threshold. Any threshold between
    // the two validation scores bracketing the crossing yields the same
    // validation decisions, so take the midpoint of that gap — the max-margin
    // point — instead of the gap edge, which sits knife-edge on a score.
    std::vector<double> va, vs;
    for (std::size_t i = 0; i < val_x.size(); ++i) {
        const double s = detail::forward(model.layers, val_x[i], ws);
        (val_y[i] == 1.0 ? va : vs).push_back(s);
    }
    const EerPoint ep = eer_point(va, vs);
    double thr = ep.threshold;
    {
        std::vector<double> all = va;
        all.insert(all.end(), vs.begin(), vs.end());
        std::sort(all.begin(), all.end());
        const auto hi = std::lower_bound(all.begin(), all.end(), thr);
        if (hi != all.begin() && hi != all.end()) thr = (*(hi - 1) + *hi) / 2.0;
    }
    model.threshold = std::clamp(thr, 1e-9, 1.0 - 1e-9);

    std::size_t correct = 0;
    for (std::size_t i = 0; i < val_x.size(); ++i) {
        const double s = detail::forward(model.layers, val_x[i], ws);
        const bool accepted = s >= model.threshold;
        if (accepted == (val_y[i] == 1.0)) ++correct;
    }
    const double val_acc = static_cast<double>(correct) / static_cast<double>(val_x.size());
    if (val_acc < opt.min_val_accuracy)
        throw std::runtime_error("training diverged: validation accuracy " +
                                 std::to_string(val_acc) + " below the required " +
                                 std::to_string(opt.min_val_accuracy));

    if (out_report) {
        out_report->val_loss = best_loss;
        out_report->val_accuracy = val_acc;
        out_report->val_eer = ep.eer;
        out_report->threshold = model.threshold;
        out_report->epochs_run = epochs_run;
        out_report->best_epoch = best_epoch;
        out_report->n_train = train_x.size();
        out_report->n_val = val_x.size();
    }
    model.validate();
    return model;
}

// ---------------------------------------------------------------------------
// Model file: JSON with 17-significant-digit decimals
// ---------------------------------------------------------------------------

namespace detail {

inline void append_array(std::string& out, const std::vector<double>& v) {
    out += '[';
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += ',';
        out += format_double_17(v[i]);
    }
    out += ']';
}

}  // namespace detail

inline std::string model_to_json(const Model& m) {
    m.validate();
    std::string out = "{\n  \"config_hash\": " + std::to_string(m.config_hash) +
                      ",\n  \"layers\": [";
    for (std::size_t li = 0; li < m.layers.size(); ++li) {
        const Layer& l = m.layers[li];
        if (li) out += ',';
        out += "\n    {\"rows\": " + std::to_string(l.w.rows) +
               ", \"cols\": " + std::to_string(l.w.cols) + ", \"weights\": ";
        detail::append_array(out, l.w.a);
        out += ", \"bias\": ";
        detail::append_array(out, l.b);
        out += '}';
    }
    out += "\n  ],\n  \"scaler\": {\"mean\": ";
    detail::append_array(out, m.scaler.mean);
    out += ", \"std\": ";
    detail::append_array(out, m.scaler.stdev);
    out += "},\n  \"threshold\": " + format_double_17(m.threshold) +
           ",\n  \"version\": " + std::to_string(m.version) + "\n}\n";
    return out;
}

inline void save_model(const Model& m, const std::string& path) {
    write_file_atomic(path, model_to_json(m));
}

inline Model load_model(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in.good()) throw std::runtime_error("cannot open model file " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw std::runtime_error("model file " + path + " is not valid JSON: " + e.what());
    }
    Model m;
    try {
        m.version = j.at("version").get<int>();
        if (m.version != 1)
            throw std::runtime_error("unsupported model version " + std::to_string(m.version));
        m.config_hash = j.at("config_hash").get<std::uint64_t>();
        m.threshold = j.at("threshold").get<double>();
        m.scaler.mean = j.at("scaler").at("mean").get<std::vector<double>>();
        m.scaler.stdev = j.at("scaler").at("std").get<std::vector<double>>();
        for (const auto& lj : j.at("layers")) {
            Layer l;
            const auto rows = lj.at("rows").get<std::size_t>();
            const auto cols = lj.at("cols").get<std::size_t>();
            l.w = dsp::Mat(rows, cols, 0.0);
            l.w.a = lj.at("weights").get<std::vector<double>>();
            if (l.w.a.size() != rows * cols)
                throw std::runtime_error("weight count does not match rows*cols");
            l.b = lj.at("bias").get<std::vector<double>>();
            m.layers.push_back(std::move(l));
        }
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error("model file " + path + " has a broken schema: " + e.what());
    }
    try {
        m.validate();
    } catch (const std::exception& e) {
        throw std::runtime_error("model file " + path + ": " + e.what());
    }
    return m;
}

}  // namespace arrayid::classifier
