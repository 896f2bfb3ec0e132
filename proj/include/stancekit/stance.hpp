#pragma once

// Stance classification head over three branches: a trainable context text
// encoder, a frozen (pretrained) sentiment text encoder, and a projected
// knowledge-graph feature. The branches are fused by one attention block and
// classified into {Pro, Con, Neu}; a reconstruction penalty ties the
// projected knowledge feature back to its source vector. Every branch can be
// disabled independently for ablation studies.

#include <algorithm>
#include <array>
#include <cstddef>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "stancekit/adam.hpp"
#include "stancekit/error.hpp"
#include "stancekit/kgraph.hpp"
#include "stancekit/param_store.hpp"
#include "stancekit/rng.hpp"
#include "stancekit/tape.hpp"
#include "stancekit/tensor.hpp"
#include "stancekit/textenc.hpp"

namespace stancekit::stance {

// ---------------------------------------------------------------------------
// Labels and macro-F1
// ---------------------------------------------------------------------------

enum class StanceLabel : std::size_t { Pro = 0, Con = 1, Neu = 2 };

inline constexpr std::size_t kLabelCount = 3;

inline const char* to_string(StanceLabel label) {
    switch (label) {
        case StanceLabel::Pro: return "Pro";
        case StanceLabel::Con: return "Con";
        case StanceLabel::Neu: return "Neu";
    }
    fail("stance", "invalid stance label value");
}

inline StanceLabel label_from_index(std::size_t index) {
    if (index >= kLabelCount) fail("stance", "stance label index out of range");
    return static_cast<StanceLabel>(index);
}

inline std::size_t label_index(StanceLabel label) { return static_cast<std::size_t>(label); }

struct ClassScores {
    double precision = 0;
    double recall = 0;
    double f1 = 0;
};

/// Confusion counts and per-class precision/recall/F1 for a prediction list.
/// Precision (recall) is 0 when its denominator is 0; F1 is 0 when
/// precision + recall = 0; macro-F1 is the unweighted mean over the three
/// classes.
struct F1Summary {
    std::array<std::array<std::size_t, kLabelCount>, kLabelCount> confusion{}; // [gold][pred]
    std::array<ClassScores, kLabelCount> per_class{};                          // Pro, Con, Neu
    double macro_f1 = 0;
};

inline F1Summary f1_summary(const std::vector<StanceLabel>& predictions,
                            const std::vector<StanceLabel>& golds) {
    if (predictions.empty()) fail("stance", "macro-F1 of an empty prediction list");
    if (predictions.size() != golds.size())
        fail("stance", "macro-F1 inputs differ in length (" + std::to_string(predictions.size()) +
                           " predictions vs " + std::to_string(golds.size()) + " golds)");
    F1Summary s;
    for (std::size_t i = 0; i < predictions.size(); ++i)
        ++s.confusion[label_index(golds[i])][label_index(predictions[i])];
    for (std::size_t c = 0; c < kLabelCount; ++c) {
        std::size_t tp = s.confusion[c][c], gold_total = 0, pred_total = 0;
        for (std::size_t o = 0; o < kLabelCount; ++o) {
            gold_total += s.confusion[c][o];
            pred_total += s.confusion[o][c];
        }
        ClassScores& cs = s.per_class[c];
        cs.precision = pred_total == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(pred_total);
        cs.recall = gold_total == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(gold_total);
        cs.f1 = (cs.precision + cs.recall) == 0.0
                    ? 0.0
                    : 2.0 * cs.precision * cs.recall / (cs.precision + cs.recall);
        s.macro_f1 += cs.f1;
    }
    s.macro_f1 /= static_cast<double>(kLabelCount);
    return s;
}

// ---------------------------------------------------------------------------
// Variants and configuration
// ---------------------------------------------------------------------------

/// Which branches the model uses. At least one text branch (sentiment or
/// context) must stay enabled. When the sentiment encoder is the only text
/// branch it is trained; otherwise it stays frozen at its pretrained values.
struct ModelVariant {
    bool use_sentiment = true;
    bool use_context = true;
    bool use_kg = true;

    static ModelVariant full() { return {true, true, true}; }
    static ModelVariant without_kg() { return {true, true, false}; }
    static ModelVariant without_sentiment() { return {false, true, true}; }
    static ModelVariant without_context() { return {true, false, true}; }

    bool sentiment_trainable() const { return use_sentiment && !use_context; }

    void validate() const {
        if (!use_sentiment && !use_context)
            fail("stance", "model variant disables both text branches; at least one of "
                           "use_sentiment/use_context must stay enabled");
    }

    bool operator==(const ModelVariant&) const = default;
};

enum class FusionMode {
    self_attention, // one self-attention block over the concatenated sequences
    query_context   // queries from the context rows, keys/values from the concatenation
};

inline const char* to_string(FusionMode mode) {
    return mode == FusionMode::self_attention ? "self-attention" : "query-context";
}

inline FusionMode fusion_mode_from_string(std::string_view name) {
    if (name == "self-attention") return FusionMode::self_attention;
    if (name == "query-context") return FusionMode::query_context;
    fail("stance", "unknown fusion mode: " + std::string(name) +
                       " (expected self-attention or query-context)");
}

/// Learning rate suited to fine-tuning large pretrained text encoders.
/// The from-scratch stand-in encoders in this library train far too slowly
/// at that rate, so StanceConfig defaults to kFromScratchLearningRate.
inline constexpr Real kFineTuneLearningRate = Real(1.5e-5);
inline constexpr Real kFromScratchLearningRate = Real(1e-3);

struct StanceConfig {
    text::EncoderConfig context;   // used when variant.use_context
    text::EncoderConfig sentiment; // must match the pretrained sentiment encoder
    FusionMode fusion_mode = FusionMode::self_attention;
    Real lambda = Real(1);            // weight of the reconstruction penalty
    Real lr = kFromScratchLearningRate;
    std::size_t batch_size = 4;
    std::size_t epochs = 3;
};

/// External inputs the model variants draw on. Knowledge fields are required
/// only when use_kg; sentiment fields only when use_sentiment.
struct StanceResources {
    const kg::KnowledgeGraph* graph = nullptr;
    const Tensor* concept_features = nullptr; // (concept_count, kg_dim), row = node id
    const kg::PosLexicon* pos = nullptr;
    const ParamStore* sentiment = nullptr; // pretrained store with sent/ entries
    const text::Vocabulary* sentiment_vocab = nullptr;
};

// ---------------------------------------------------------------------------
// Commonsense feature
// ---------------------------------------------------------------------------

/// Mean of the feature rows of every concept in the vicinity subgraph seeded
/// by the document+topic content words. Zero vector iff nothing matched.
struct CommonsenseFeature {
    Tensor h_kg;                            // (1, kg_dim)
    std::size_t matched_concept_count = 0;  // concepts contributing to the mean
};

inline CommonsenseFeature commonsense_feature(const std::string& document, const std::string& topic,
                                              const kg::KnowledgeGraph& graph,
                                              const Tensor& features,
                                              const kg::PosLexicon& pos_oracle) {
    if (features.rank() != 2 || features.dim(0) != graph.concept_count())
        fail("stance", "concept feature table must have one row per graph concept");
    const std::size_t d = features.dim(1);
    const auto seeds = kg::extract_seed_terms({document, topic}, pos_oracle);
    const auto sub = kg::extract_subgraph(graph, seeds, kg::SubgraphMode::vicinity);
    CommonsenseFeature out;
    out.h_kg = Tensor({1, d});
    out.matched_concept_count = sub.new_to_old.size();
    if (out.matched_concept_count == 0) return out;
    for (kg::NodeId old_id : sub.new_to_old)
        for (std::size_t j = 0; j < d; ++j) out.h_kg(0, j) += features(old_id, j);
    const Real inv = Real(1) / static_cast<Real>(out.matched_concept_count);
    for (std::size_t j = 0; j < d; ++j) out.h_kg(0, j) *= inv;
    return out;
}

/// Affine projection of h_kg into the text encoders' hidden width, evaluated
/// outside any tape (for inspection; training projects on-tape).
inline Tensor project_commonsense(const ParamStore& store, const Tensor& h_kg) {
    const Tensor& W = store.tensor("kg/Wk");
    const Tensor& b = store.tensor("kg/bk");
    if (h_kg.rank() != 2 || h_kg.dim(0) != 1 || h_kg.dim(1) != W.dim(0))
        fail("stance", "commonsense projection input width does not match kg/Wk");
    Tensor out({1, W.dim(1)});
    for (std::size_t j = 0; j < W.dim(1); ++j) {
        Real z = b[j];
        for (std::size_t k = 0; k < W.dim(0); ++k) z += h_kg(0, k) * W(k, j);
        out(0, j) = z;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Model assembly
// ---------------------------------------------------------------------------

struct StanceModel {
    StanceConfig cfg;
    ModelVariant variant;
    ParamStore store;
    text::Vocabulary ctx_vocab;  // meaningful only when use_context
    text::Vocabulary sent_vocab; // meaningful only when use_sentiment
};

namespace detail {

/// The fusion block reuses the context encoder's head layout.
inline text::EncoderConfig fusion_config(const StanceConfig& cfg) { return cfg.context; }

inline std::size_t hidden_width(const StanceConfig& cfg, const ModelVariant& v) {
    return v.use_context ? cfg.context.d_model : cfg.sentiment.d_model;
}

inline bool is_encoder_entry(std::string_view name, std::string_view prefix) {
    if (name.size() <= prefix.size() || name.substr(0, prefix.size()) != prefix) return false;
    const std::string_view rest = name.substr(prefix.size());
    return rest.rfind("emb/", 0) == 0 || rest.rfind("block", 0) == 0;
}

} // namespace detail

/// Builds and initializes a model for `variant`. Draw order under
/// rng.derive("init"): context encoder, fusion block, knowledge projection,
/// reconstruction decoder, classifier. Sentiment entries are copied from the
/// pretrained store and are trainable only when the sentiment branch is the
/// sole text branch.
inline StanceModel init_stance_model(StanceConfig cfg, ModelVariant variant,
                                     const StanceResources& res,
                                     const text::Vocabulary& ctx_vocab, const RngStream& rng) {
    variant.validate();
    if (cfg.lambda < Real(0)) fail("stance", "reconstruction weight lambda must be >= 0");

    std::size_t kg_dim = 0;
    if (variant.use_kg) {
        if (!res.graph || !res.concept_features || !res.pos)
            fail("stance", "knowledge-enabled variant needs graph, concept features, and a "
                           "part-of-speech oracle");
        if (res.concept_features->rank() != 2 ||
            res.concept_features->dim(0) != res.graph->concept_count())
            fail("stance", "concept feature table must have one row per graph concept");
        kg_dim = res.concept_features->dim(1);
        if (kg_dim == 0) fail("stance", "concept feature table has zero width");
    }
    if (variant.use_sentiment) {
        if (!res.sentiment || !res.sentiment_vocab)
            fail("stance", "sentiment-enabled variant needs a pretrained sentiment store and its "
                           "vocabulary");
        if (!res.sentiment->has("sent/emb/token"))
            fail("stance", "pretrained sentiment store lacks sent/ encoder entries");
        const Tensor& emb = res.sentiment->tensor("sent/emb/token");
        if (emb.dim(0) != res.sentiment_vocab->size())
            fail("stance", "sentiment vocabulary size does not match the pretrained embedding table");
        cfg.sentiment.vocab_size = res.sentiment_vocab->size();
        if (emb.dim(1) != cfg.sentiment.d_model)
            fail("stance", "sentiment encoder config d_model does not match the pretrained store");
    }
    if (variant.use_context) {
        if (ctx_vocab.size() <= text::Vocabulary::kSpecialCount)
            fail("stance", "context vocabulary holds no corpus tokens");
        cfg.context.vocab_size = ctx_vocab.size();
    }
    if (variant.use_context && variant.use_sentiment &&
        cfg.context.d_model != cfg.sentiment.d_model)
        fail("stance", "context and sentiment encoders disagree on d_model; fusion needs equal widths");

    StanceModel m;
    m.variant = variant;
    RngStream init = rng.derive("init");

    if (variant.use_context) {
        text::init_encoder_params(m.store, "ctx/", cfg.context, init, true);
        m.ctx_vocab = ctx_vocab;
    }
    if (variant.use_sentiment) {
        const bool trainable = variant.sentiment_trainable();
        std::size_t copied = 0;
        for (const std::string& name : res.sentiment->names())
            if (detail::is_encoder_entry(name, "sent/")) {
                m.store.add(name, res.sentiment->tensor(name), trainable);
                ++copied;
            }
        if (copied == 0) fail("stance", "pretrained sentiment store lacks sent/ encoder entries");
        m.sent_vocab = *res.sentiment_vocab;
    }
    if (variant.use_context && variant.use_sentiment)
        text::init_block_params(m.store, "fuse/", detail::fusion_config(cfg), init, true);

    const std::size_t d_model = detail::hidden_width(cfg, variant);
    if (variant.use_kg) {
        m.store.add("kg/Wk", glorot_uniform(kg_dim, d_model, {kg_dim, d_model}, init), true);
        m.store.add("kg/bk", Tensor({d_model}), true);
        m.store.add("kg/recon/W", glorot_uniform(d_model, kg_dim, {d_model, kg_dim}, init), true);
        m.store.add("kg/recon/b", Tensor({kg_dim}), true);
    }
    const std::size_t cls_width = d_model + (variant.use_kg ? d_model : 0);
    m.store.add("cls/W", glorot_uniform(cls_width, kLabelCount, {cls_width, kLabelCount}, init), true);
    m.store.add("cls/b", Tensor({kLabelCount}), true);

    m.cfg = cfg;
    return m;
}

// ---------------------------------------------------------------------------
// Example preparation
// ---------------------------------------------------------------------------

struct LabeledExample {
    std::string id;
    std::string document;
    std::string topic;
    StanceLabel gold = StanceLabel::Neu;
};

/// Everything a forward pass needs for one example, computed once and reused
/// across epochs. When the sentiment encoder is frozen, its hidden states are
/// constant and cached here so training does not re-encode them every step.
struct PreparedExample {
    std::string id;
    StanceLabel gold = StanceLabel::Neu;
    text::TokenSequence ctx_seq;
    text::TokenSequence sent_seq;
    Tensor sent_hidden; // cached frozen-encoder output; empty when trainable/disabled
    Tensor h_kg;        // (1, kg_dim); empty when the knowledge branch is off
    std::size_t matched_concepts = 0;
};

inline PreparedExample prepare_example(StanceModel& m, const StanceResources& res,
                                       const LabeledExample& ex) {
    PreparedExample p;
    p.id = ex.id;
    p.gold = ex.gold;
    if (m.variant.use_context)
        p.ctx_seq = text::tokenize(ex.document, ex.topic, m.ctx_vocab, m.cfg.context.max_len);
    if (m.variant.use_sentiment) {
        p.sent_seq = text::tokenize(ex.document, ex.topic, m.sent_vocab, m.cfg.sentiment.max_len);
        if (!m.variant.sentiment_trainable()) {
            Tape tape;
            p.sent_hidden = text::encode(tape, m.store, "sent/", m.cfg.sentiment, p.sent_seq)
                                .hidden.value();
        }
    }
    if (m.variant.use_kg) {
        if (!res.graph || !res.concept_features || !res.pos)
            fail("stance", "knowledge-enabled variant needs graph, concept features, and a "
                           "part-of-speech oracle");
        CommonsenseFeature cf =
            commonsense_feature(ex.document, ex.topic, *res.graph, *res.concept_features, *res.pos);
        p.h_kg = std::move(cf.h_kg);
        p.matched_concepts = cf.matched_concept_count;
    }
    return p;
}

inline std::vector<PreparedExample> prepare_examples(StanceModel& m, const StanceResources& res,
                                                     const std::vector<LabeledExample>& xs) {
    std::vector<PreparedExample> out;
    out.reserve(xs.size());
    for (const auto& ex : xs) out.push_back(prepare_example(m, res, ex));
    return out;
}

// ---------------------------------------------------------------------------
// Forward pass
// ---------------------------------------------------------------------------

/// Fuses the two text branches: concatenate the hidden sequences along the
/// sequence axis (context first) under the combined padding mask, run one
/// attention block, and read out the row at the context [CLS] position. In
/// query-context mode the queries come from the context rows instead of the
/// concatenation. Note that with a single fusion block the two modes agree
/// at the readout: the [CLS] query row and the key/value set coincide, and
/// the norm/feed-forward stages are row-local, so the routings only diverge
/// in rows the readout discards (they would differ under stacked fusion
/// blocks). The option is kept for architecture exploration.
inline Var fuse(Tape& tape, ParamStore& store, const StanceConfig& cfg, Var ctx_hidden,
                const text::TokenSequence& ctx_seq, Var sent_hidden,
                const text::TokenSequence& sent_seq) {
    if (ctx_hidden.value().dim(1) != sent_hidden.value().dim(1))
        fail("stance", "fusion inputs disagree on d_model");
    Var cat = tape.concat_rows(ctx_hidden, sent_hidden);
    std::vector<std::uint8_t> valid = ctx_seq.attention;
    valid.insert(valid.end(), sent_seq.attention.begin(), sent_seq.attention.end());
    const text::EncoderConfig fcfg = detail::fusion_config(cfg);
    Var fused = cfg.fusion_mode == FusionMode::self_attention
                    ? text::transformer_block(tape, store, "fuse/", fcfg, cat, valid)
                    : text::attention_block(tape, store, "fuse/", fcfg, ctx_hidden, cat, valid);
    return tape.slice_rows(fused, ctx_seq.cls_index, 1);
}

/// Softmax classification of feature rows (one example per row; each row is
/// h_cls alone or [h_cls, h_k]).
inline Var classify(Tape& tape, ParamStore& store, Var features) {
    Var logits = tape.add_bias(tape.matmul(features, tape.param(store, "cls/W")),
                               tape.param(store, "cls/b"));
    return tape.softmax_rows(logits);
}

inline Var classify(Tape& tape, ParamStore& store, Var h_cls, std::optional<Var> h_k) {
    return classify(tape, store, h_k ? tape.concat_cols(h_cls, *h_k) : h_cls);
}

/// Mean negative log-probability of the gold labels (probabilities clamped
/// at 1e-12).
inline Var stance_loss(Tape& tape, Var probabilities, const std::vector<StanceLabel>& gold) {
    std::vector<std::size_t> idx(gold.size());
    for (std::size_t i = 0; i < gold.size(); ++i) idx[i] = label_index(gold[i]);
    return tape.nll_mean(probabilities, std::move(idx));
}

/// Mean squared reconstruction error: decode each projected row back to the
/// knowledge width and penalize the squared distance to its source vector.
inline Var recon_loss(Tape& tape, ParamStore& store, Var h_k_rows, Var h_kg_rows) {
    Var decoded = tape.add_bias(tape.matmul(h_k_rows, tape.param(store, "kg/recon/W")),
                                tape.param(store, "kg/recon/b"));
    return tape.mean_rows_sumsq(tape.sub(decoded, h_kg_rows));
}

/// total = classification + lambda * reconstruction; the reconstruction term
/// is dropped entirely when the knowledge branch is off.
inline Var total_loss(Tape& tape, Var classification, const Var* reconstruction, Real lambda,
                      bool use_kg) {
    if (lambda < Real(0)) fail("stance", "reconstruction weight lambda must be >= 0");
    if (!use_kg || reconstruction == nullptr || lambda == Real(0)) return classification;
    return tape.add(classification, tape.scale(*reconstruction, lambda));
}

inline Real total_loss(Real classification, Real reconstruction, Real lambda, bool use_kg = true) {
    if (lambda < Real(0)) fail("stance", "reconstruction weight lambda must be >= 0");
    return use_kg ? classification + lambda * reconstruction : classification;
}

struct BatchOutput {
    Var probabilities;                   // (batch, 3)
    Var classification;                  // scalar
    std::optional<Var> reconstruction;   // scalar; engaged iff use_kg
    Var total;                           // scalar
};

/// Forward pass + losses for the examples at `indices`.
inline BatchOutput stance_batch(Tape& tape, StanceModel& m,
                                const std::vector<PreparedExample>& examples,
                                const std::vector<std::size_t>& indices) {
    if (indices.empty()) fail("stance", "stance batch is empty");
    const ModelVariant& v = m.variant;
    Var feat_rows, hk_rows;
    std::vector<StanceLabel> gold;
    Tensor hkg_rows;
    const std::size_t kg_dim = v.use_kg ? m.store.tensor("kg/Wk").dim(0) : 0;
    if (v.use_kg) hkg_rows = Tensor({indices.size(), kg_dim});
    for (std::size_t n = 0; n < indices.size(); ++n) {
        const PreparedExample& ex = examples.at(indices[n]);
        if (v.use_kg && (ex.h_kg.rank() != 2 || ex.h_kg.dim(1) != kg_dim))
            fail("stance", "prepared example lacks a knowledge feature of the model's width");
        gold.push_back(ex.gold);

        std::optional<Var> ctx_hidden, ctx_pooled, sent_hidden, sent_pooled;
        if (v.use_context) {
            text::EncodeResult enc = text::encode(tape, m.store, "ctx/", m.cfg.context, ex.ctx_seq);
            ctx_hidden = enc.hidden;
            ctx_pooled = enc.pooled;
        }
        if (v.use_sentiment) {
            if (ex.sent_hidden.size() != 0) {
                Var h = tape.constant(ex.sent_hidden);
                sent_hidden = h;
                sent_pooled = tape.slice_rows(h, ex.sent_seq.cls_index, 1);
            } else {
                text::EncodeResult enc =
                    text::encode(tape, m.store, "sent/", m.cfg.sentiment, ex.sent_seq);
                sent_hidden = enc.hidden;
                sent_pooled = enc.pooled;
            }
        }
        Var h_cls = ctx_hidden && sent_hidden
                        ? fuse(tape, m.store, m.cfg, *ctx_hidden, ex.ctx_seq, *sent_hidden, ex.sent_seq)
                        : (ctx_pooled ? *ctx_pooled : *sent_pooled);

        Var row = h_cls;
        if (v.use_kg) {
            Var h_k = tape.add_bias(tape.matmul(tape.constant(ex.h_kg), tape.param(m.store, "kg/Wk")),
                                    tape.param(m.store, "kg/bk"));
            row = tape.concat_cols(h_cls, h_k);
            hk_rows = n == 0 ? h_k : tape.concat_rows(hk_rows, h_k);
            for (std::size_t j = 0; j < ex.h_kg.dim(1); ++j) hkg_rows(n, j) = ex.h_kg(0, j);
        }
        feat_rows = n == 0 ? row : tape.concat_rows(feat_rows, row);
    }

    BatchOutput out;
    out.probabilities = classify(tape, m.store, feat_rows);
    out.classification = stance_loss(tape, out.probabilities, gold);
    if (v.use_kg)
        out.reconstruction = recon_loss(tape, m.store, hk_rows, tape.constant(std::move(hkg_rows)));
    out.total = total_loss(tape, out.classification,
                           out.reconstruction ? &*out.reconstruction : nullptr, m.cfg.lambda, v.use_kg);
    return out;
}

// ---------------------------------------------------------------------------
// Prediction
// ---------------------------------------------------------------------------

struct Prediction {
    std::string id;
    std::array<double, kLabelCount> probabilities{}; // Pro, Con, Neu
    StanceLabel predicted = StanceLabel::Neu;
};

inline std::vector<Prediction> predict(StanceModel& m, const std::vector<PreparedExample>& examples,
                                       std::size_t chunk = 32) {
    std::vector<Prediction> out;
    out.reserve(examples.size());
    if (chunk == 0) chunk = 1;
    for (std::size_t start = 0; start < examples.size(); start += chunk) {
        const std::size_t n = std::min(chunk, examples.size() - start);
        std::vector<std::size_t> idx(n);
        for (std::size_t i = 0; i < n; ++i) idx[i] = start + i;
        Tape tape;
        BatchOutput batch = stance_batch(tape, m, examples, idx);
        const Tensor& probs = batch.probabilities.value();
        for (std::size_t i = 0; i < n; ++i) {
            Prediction p;
            p.id = examples[start + i].id;
            std::size_t best = 0;
            for (std::size_t c = 0; c < kLabelCount; ++c) {
                p.probabilities[c] = static_cast<double>(probs(i, c));
                if (p.probabilities[c] > p.probabilities[best]) best = c;
            }
            p.predicted = label_from_index(best);
            out.push_back(std::move(p));
        }
    }
    return out;
}

inline void write_predictions_tsv(std::ostream& out, const std::vector<Prediction>& predictions) {
    out << "example_id\tpro_prob\tcon_prob\tneu_prob\tpredicted\n";
    for (const Prediction& p : predictions) {
        out << p.id;
        for (double v : p.probabilities) out << '\t' << format_double(v);
        out << '\t' << to_string(p.predicted) << '\n';
    }
}

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

struct EpochLog {
    std::size_t epoch = 0; // 1-based
    double train_total = 0;
    double train_classification = 0;
    double train_reconstruction = 0; // 0 when the knowledge branch is off
    double dev_macro_f1 = 0;
};

struct TrainResult {
    StanceModel model; // best-dev checkpoint
    std::vector<EpochLog> history;
    std::size_t best_epoch = 0; // 0 when no epoch ran
    double best_dev_macro_f1 = 0;
};

namespace detail {

inline double dev_macro_f1(StanceModel& m, const std::vector<PreparedExample>& dev) {
    std::vector<StanceLabel> preds, golds;
    preds.reserve(dev.size());
    golds.reserve(dev.size());
    for (const Prediction& p : predict(m, dev)) preds.push_back(p.predicted);
    for (const PreparedExample& ex : dev) golds.push_back(ex.gold);
    return f1_summary(preds, golds).macro_f1;
}

} // namespace detail

/// Minibatch Adam training with a per-epoch dev evaluation; the checkpoint
/// with the best dev macro-F1 is returned (ties keep the earlier epoch).
/// Stream use: derive("init") for parameters, derive("epoch").derive(e) for
/// the epoch-e shuffle; the caller's stream is never advanced. The context
/// vocabulary is built from the training split only, so unseen dev/test
/// words map to the unknown token.
inline TrainResult train_stance(const std::vector<LabeledExample>& train,
                                const std::vector<LabeledExample>& dev,
                                const StanceResources& res, const StanceConfig& cfg,
                                ModelVariant variant, const RngStream& rng) {
    if (train.empty() || dev.empty())
        fail("stance", "training and dev sets must both be non-empty");
    variant.validate();

    text::Vocabulary ctx_vocab;
    if (variant.use_context) {
        std::vector<std::string> texts;
        texts.reserve(train.size() * 2);
        for (const auto& ex : train) {
            texts.push_back(ex.document);
            texts.push_back(ex.topic);
        }
        ctx_vocab = text::Vocabulary::build(texts);
    }

    TrainResult result;
    result.model = init_stance_model(cfg, variant, res, ctx_vocab, rng);
    StanceModel& m = result.model;

    const std::vector<PreparedExample> train_prep = prepare_examples(m, res, train);
    const std::vector<PreparedExample> dev_prep = prepare_examples(m, res, dev);

    Adam opt(AdamConfig{static_cast<double>(m.cfg.lr), 0.9, 0.999, 1e-8});
    ParamStore best_store = m.store;
    double best_f1 = -1.0;
    std::size_t best_epoch = 0;

    std::vector<std::size_t> order(train_prep.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    for (std::size_t epoch = 1; epoch <= m.cfg.epochs; ++epoch) {
        RngStream shuffle_rng = rng.derive("epoch").derive(epoch);
        shuffle_rng.shuffle(order);

        double sum_total = 0, sum_cls = 0, sum_rec = 0;
        for (std::size_t start = 0; start < order.size(); start += m.cfg.batch_size) {
            const std::size_t n = std::min(m.cfg.batch_size, order.size() - start);
            const std::vector<std::size_t> batch(order.begin() + static_cast<std::ptrdiff_t>(start),
                                                 order.begin() + static_cast<std::ptrdiff_t>(start + n));
            Tape tape;
            BatchOutput out = stance_batch(tape, m, train_prep, batch);
            const double w = static_cast<double>(n);
            sum_total += static_cast<double>(out.total.value()[0]) * w;
            sum_cls += static_cast<double>(out.classification.value()[0]) * w;
            if (out.reconstruction)
                sum_rec += static_cast<double>(out.reconstruction->value()[0]) * w;
            m.store.zero_grads();
            tape.backward(out.total);
            m.store.fill_missing_grads();
            opt.step(m.store);
        }

        EpochLog log;
        log.epoch = epoch;
        const double inv_n = 1.0 / static_cast<double>(train_prep.size());
        log.train_total = sum_total * inv_n;
        log.train_classification = sum_cls * inv_n;
        log.train_reconstruction = sum_rec * inv_n;
        log.dev_macro_f1 = detail::dev_macro_f1(m, dev_prep);
        result.history.push_back(log);

        if (log.dev_macro_f1 > best_f1) {
            best_f1 = log.dev_macro_f1;
            best_epoch = epoch;
            best_store = m.store;
        }
    }

    if (m.cfg.epochs == 0) best_f1 = detail::dev_macro_f1(m, dev_prep);

    m.store = std::move(best_store);
    result.best_epoch = best_epoch;
    result.best_dev_macro_f1 = best_f1;
    return result;
}

// ---------------------------------------------------------------------------
// Checkpointing
// ---------------------------------------------------------------------------

namespace detail {

inline nlohmann::json encoder_config_json(const text::EncoderConfig& c) {
    return {{"vocab_size", c.vocab_size}, {"d_model", c.d_model}, {"n_blocks", c.n_blocks},
            {"n_heads", c.n_heads},       {"d_ff", c.d_ff},       {"max_len", c.max_len}};
}

inline text::EncoderConfig encoder_config_from_json(const nlohmann::json& j) {
    text::EncoderConfig c;
    c.vocab_size = j.at("vocab_size").get<std::size_t>();
    c.d_model = j.at("d_model").get<std::size_t>();
    c.n_blocks = j.at("n_blocks").get<std::size_t>();
    c.n_heads = j.at("n_heads").get<std::size_t>();
    c.d_ff = j.at("d_ff").get<std::size_t>();
    c.max_len = j.at("max_len").get<std::size_t>();
    return c;
}

inline std::string vocab_text(const text::Vocabulary& v) {
    std::ostringstream out;
    v.save(out);
    return out.str();
}

} // namespace detail

inline void save_stance_model(const StanceModel& m, const std::string& path) {
    nlohmann::json meta;
    meta["model"] = "stance";
    meta["variant"] = {{"use_sentiment", m.variant.use_sentiment},
                       {"use_context", m.variant.use_context},
                       {"use_kg", m.variant.use_kg}};
    meta["config"] = {{"context", detail::encoder_config_json(m.cfg.context)},
                      {"sentiment", detail::encoder_config_json(m.cfg.sentiment)},
                      {"fusion_mode", to_string(m.cfg.fusion_mode)},
                      {"lambda", static_cast<double>(m.cfg.lambda)},
                      {"lr", static_cast<double>(m.cfg.lr)},
                      {"batch_size", m.cfg.batch_size},
                      {"epochs", m.cfg.epochs}};
    meta["ctx_vocab"] = detail::vocab_text(m.ctx_vocab);
    meta["sent_vocab"] = detail::vocab_text(m.sent_vocab);
    m.store.save(path, meta);
}

inline StanceModel load_stance_model(const std::string& path) {
    nlohmann::json meta;
    ParamStore store = ParamStore::load(path, &meta);
    if (meta.value("model", "") != "stance")
        fail("stance", "checkpoint at " + path + " is not a stance model");
    StanceModel m;
    m.store = std::move(store);
    const auto& v = meta.at("variant");
    m.variant.use_sentiment = v.at("use_sentiment").get<bool>();
    m.variant.use_context = v.at("use_context").get<bool>();
    m.variant.use_kg = v.at("use_kg").get<bool>();
    const auto& c = meta.at("config");
    m.cfg.context = detail::encoder_config_from_json(c.at("context"));
    m.cfg.sentiment = detail::encoder_config_from_json(c.at("sentiment"));
    m.cfg.fusion_mode = fusion_mode_from_string(c.at("fusion_mode").get<std::string>());
    m.cfg.lambda = static_cast<Real>(c.at("lambda").get<double>());
    m.cfg.lr = static_cast<Real>(c.at("lr").get<double>());
    m.cfg.batch_size = c.at("batch_size").get<std::size_t>();
    m.cfg.epochs = c.at("epochs").get<std::size_t>();
    std::istringstream ctx_in(meta.at("ctx_vocab").get<std::string>());
    std::istringstream sent_in(meta.at("sent_vocab").get<std::string>());
    m.ctx_vocab = text::Vocabulary::load(ctx_in);
    m.sent_vocab = text::Vocabulary::load(sent_in);
    return m;
}

} // namespace stancekit::stance
