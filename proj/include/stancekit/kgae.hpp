#pragma once

// Graph autoencoder over a knowledge graph: a two-layer relational graph
// convolution encoder producing one feature row per concept, a diagonal
// bilinear (DistMult-style) edge scorer, and a pretraining loop that learns
// both by classifying true edges against randomly corrupted ones.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <functional>
#include <istream>
#include <optional>
#include <ostream>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "stancekit/adam.hpp"
#include "stancekit/error.hpp"
#include "stancekit/kgraph.hpp"
#include "stancekit/param_store.hpp"
#include "stancekit/rng.hpp"
#include "stancekit/tape.hpp"
#include "stancekit/tensor.hpp"
#include "stancekit/text_util.hpp"

namespace stancekit::kgae {

// ---------------------------------------------------------------------------
// Parameters
// ---------------------------------------------------------------------------
//
// All parameters live in a ParamStore under a caller-chosen prefix:
//
//   g                       |V| x d   trainable input feature per concept
//   layer1/self             d x d     weight applied to a node's own features
//   layer1/rel{r}/fwd       d x d     message weight for edges (j, r, i): j -> i
//   layer1/rel{r}/inv       d x d     message weight for edges (i, r, j): j -> i
//   layer2/...                        same layout for the second layer
//   decoder/relation_diag   |R| x d   diagonal bilinear factor per relation
//
// Each relation gets a forward and an inverse message type so that messages
// flow both ways along an edge; otherwise pure sinks would never hear from
// their neighbours.

struct ModelDims {
    std::size_t concepts = 0;
    std::size_t relations = 0;
    std::size_t feature_dim = 0;
};

inline std::string layer_prefix(const std::string& prefix, int layer) {
    return prefix + "layer" + std::to_string(layer) + "/";
}

inline std::string relation_weight_name(const std::string& layer_pref, std::size_t rel,
                                        bool forward) {
    return layer_pref + "rel" + std::to_string(rel) + (forward ? "/fwd" : "/inv");
}

/// Creates every autoencoder parameter under `prefix`. Weight matrices are
/// Glorot-initialised; the concept features and relation diagonals are
/// normal draws scaled by 1/sqrt(d) so initial edge scores sit near 0.5.
inline void init_autoencoder_params(ParamStore& store, const std::string& prefix,
                                    const kg::KnowledgeGraph& graph, std::size_t feature_dim,
                                    RngStream& rng) {
    if (feature_dim == 0) fail("kgae", "feature dimension must be at least 1");
    const std::size_t n = graph.concept_count();
    const std::size_t d = feature_dim;
    store.add(prefix + "g", scaled_normal({n, d}, d, rng));
    for (int layer : {1, 2}) {
        const std::string lp = layer_prefix(prefix, layer);
        store.add(lp + "self", glorot_uniform(d, d, {d, d}, rng));
        for (std::size_t r = 0; r < graph.relation_count(); ++r) {
            store.add(relation_weight_name(lp, r, true), glorot_uniform(d, d, {d, d}, rng));
            store.add(relation_weight_name(lp, r, false), glorot_uniform(d, d, {d, d}, rng));
        }
    }
    store.add(prefix + "decoder/relation_diag",
              scaled_normal({graph.relation_count(), d}, d, rng));
}

// ---------------------------------------------------------------------------
// Encoder
// ---------------------------------------------------------------------------

namespace detail {

inline void validate_message_edges(const kg::KnowledgeGraph& graph,
                                   std::span<const kg::Triple> message_edges) {
    for (const kg::Triple& t : message_edges)
        if (t.head >= graph.concept_count() || t.tail >= graph.concept_count() ||
            t.rel >= graph.relation_count())
            fail("kgae", "message edge references an id outside the graph");
}

inline const Tensor& checked_square(const ParamStore& store, const std::string& name,
                                    std::size_t d) {
    if (!store.has(name)) fail("kgae", "missing parameter " + name);
    const Tensor& w = store.tensor(name);
    if (w.rank() != 2 || w.dim(0) != d || w.dim(1) != d)
        fail("kgae", "dimension mismatch for " + name);
    return w;
}

/// Mean-aggregation matrix for one message type: entry (i, j) = 1/v_i where
/// v_i is the number of message sources for node i under this type.
inline SparseMatrix mean_aggregator(std::size_t n,
                                    const std::vector<std::pair<std::size_t, std::size_t>>& pairs) {
    std::vector<std::size_t> indegree(n, 0);
    for (const auto& [row, col] : pairs) indegree[row] += 1;
    std::vector<SparseMatrix::Triplet> triplets;
    triplets.reserve(pairs.size());
    for (const auto& [row, col] : pairs)
        triplets.push_back({row, col, Real(1) / static_cast<Real>(indegree[row])});
    return SparseMatrix::from_triplets(n, n, triplets);
}

} // namespace detail

/// One relational graph convolution layer:
///   h_i = ReLU( W_self x_i + sum over message types t of
///               (1/v_{i,t}) * sum_{j in N_i^t} W_t x_j )
/// where the neighbourhoods N_i^t are induced by `message_edges` only; the
/// graph supplies nothing but the concept/relation counts. v_{i,t} is the
/// message-source count of node i under type t within `message_edges`.
inline Var rgcn_layer(Tape& tape, const kg::KnowledgeGraph& graph, ParamStore& store,
                      const std::string& layer_pref, Var x,
                      std::span<const kg::Triple> message_edges) {
    const Tensor& xv = x.value();
    if (xv.rank() != 2 || xv.dim(0) != graph.concept_count())
        fail("kgae", "feature matrix rows do not match the concept count");
    const std::size_t n = graph.concept_count();
    const std::size_t d = xv.dim(1);
    detail::validate_message_edges(graph, message_edges);
    detail::checked_square(store, layer_pref + "self", d);

    Var out = tape.matmul_nt(x, tape.param(store, layer_pref + "self"));

    // Bucket edges by relation; each relation contributes a forward type
    // (tail hears from head) and an inverse type (head hears from tail).
    using Pairs = std::vector<std::pair<std::size_t, std::size_t>>;
    std::vector<Pairs> forward(graph.relation_count()), inverse(graph.relation_count());
    for (const kg::Triple& t : message_edges) {
        forward[t.rel].push_back({t.tail, t.head});
        inverse[t.rel].push_back({t.head, t.tail});
    }
    for (std::size_t r = 0; r < graph.relation_count(); ++r) {
        for (bool fwd : {true, false}) {
            const std::string name = relation_weight_name(layer_pref, r, fwd);
            detail::checked_square(store, name, d);
            const Pairs& pairs = fwd ? forward[r] : inverse[r];
            if (pairs.empty()) continue;
            SparseMatrix agg = detail::mean_aggregator(n, pairs);
            out = tape.add(out, tape.matmul_nt(tape.spmm(agg, x), tape.param(store, name)));
        }
    }
    return tape.relu(out);
}

/// Both encoder layers: features g -> layer1 -> layer2. Returns the |V| x d
/// embedding matrix.
inline Var rgcn_forward(Tape& tape, const kg::KnowledgeGraph& graph, ParamStore& store,
                        const std::string& prefix, std::span<const kg::Triple> message_edges) {
    Var g = tape.param(store, prefix + "g");
    Var h1 = rgcn_layer(tape, graph, store, layer_prefix(prefix, 1), g, message_edges);
    return rgcn_layer(tape, graph, store, layer_prefix(prefix, 2), h1, message_edges);
}

// ---------------------------------------------------------------------------
// Decoder
// ---------------------------------------------------------------------------

/// logistic( sum_k h_i[k] * diag[k] * h_j[k] ). The per-term product is
/// computed as (h_i * h_j) * diag so the result is bit-identical under
/// swapping i and j.
inline Real distmult_score(std::span<const Real> h_i, std::span<const Real> relation_diag,
                           std::span<const Real> h_j) {
    if (h_i.size() != h_j.size() || h_i.size() != relation_diag.size())
        fail("kgae", "dimension mismatch in edge scoring");
    Real z = 0;
    for (std::size_t k = 0; k < h_i.size(); ++k) z += (h_i[k] * h_j[k]) * relation_diag[k];
    return Real(1) / (Real(1) + std::exp(-z));
}

/// Id-based convenience over an embedding table and relation-diagonal table.
inline Real distmult_score(const Tensor& embeddings, kg::NodeId i, kg::RelId r, kg::NodeId j,
                           const Tensor& relation_diag) {
    if (i >= embeddings.dim(0) || j >= embeddings.dim(0))
        fail("kgae", "unknown concept id in edge scoring");
    if (r >= relation_diag.dim(0)) fail("kgae", "unknown relation id in edge scoring");
    return distmult_score(embeddings.row(i), relation_diag.row(r), embeddings.row(j));
}

// ---------------------------------------------------------------------------
// Negative sampling
// ---------------------------------------------------------------------------

struct TripleSample {
    kg::Triple triple;
    int label = 0; // 1 = true edge, 0 = corrupted
};

struct NegativeSampleSet {
    std::vector<TripleSample> samples; // interleaved: positive, its negative, ...
    std::size_t source_edge_count = 0;
};

/// For each positive, draws one corruption: a slot chosen uniformly from
/// {head, tail, relation} is replaced by a uniform element of the matching
/// table, retrying (slot re-drawn too) until the result differs from the
/// source. Corruptions are NOT filtered against true edges; collisions are
/// rare and tolerated.
inline NegativeSampleSet sample_negatives(std::span<const kg::Triple> positives,
                                          const kg::KnowledgeGraph& graph, RngStream& rng) {
    if (positives.empty()) fail("kgae", "no positive triples to corrupt");
    constexpr int kMaxAttempts = 1000;
    NegativeSampleSet out;
    out.source_edge_count = positives.size();
    out.samples.reserve(positives.size() * 2);
    for (const kg::Triple& pos : positives) {
        kg::Triple neg = pos;
        int attempt = 0;
        for (; attempt < kMaxAttempts; ++attempt) {
            neg = pos;
            const std::size_t slot = rng.uniform_int(3);
            if (slot == 0)
                neg.head = static_cast<kg::NodeId>(rng.uniform_int(graph.concept_count()));
            else if (slot == 1)
                neg.tail = static_cast<kg::NodeId>(rng.uniform_int(graph.concept_count()));
            else
                neg.rel = static_cast<kg::RelId>(rng.uniform_int(graph.relation_count()));
            if (!(neg == pos)) break;
        }
        if (attempt == kMaxAttempts)
            fail("kgae", "negative sampling could not corrupt a triple after 1000 attempts; "
                         "the graph is too small to corrupt");
        out.samples.push_back({pos, 1});
        out.samples.push_back({neg, 0});
    }
    return out;
}

// ---------------------------------------------------------------------------
// Loss
// ---------------------------------------------------------------------------

/// Mean binary cross-entropy over the sample set:
///   L = -(1/|samples|) * sum_s [ u_s log p_s + (1-u_s) log(1-p_s) ]
/// with |samples| = 2 * source_edge_count and scores clamped away from 0/1
/// before the log.
inline Var autoencoder_loss(Tape& tape, const NegativeSampleSet& samples, Var embeddings,
                            Var relation_diag) {
    if (samples.samples.empty()) fail("kgae", "empty sample set");
    std::vector<std::size_t> heads, rels, tails;
    std::vector<Real> labels;
    heads.reserve(samples.samples.size());
    rels.reserve(samples.samples.size());
    tails.reserve(samples.samples.size());
    labels.reserve(samples.samples.size());
    for (const TripleSample& s : samples.samples) {
        heads.push_back(s.triple.head);
        rels.push_back(s.triple.rel);
        tails.push_back(s.triple.tail);
        labels.push_back(static_cast<Real>(s.label));
    }
    Var h = tape.gather_rows(embeddings, heads);
    Var t = tape.gather_rows(embeddings, tails);
    Var r = tape.gather_rows(relation_diag, rels);
    // (h * t) * r keeps scoring bit-symmetric in head/tail, matching
    // distmult_score above.
    Var logits = tape.row_sum(tape.mul(tape.mul(h, t), r));
    return tape.bce_mean(tape.sigmoid(logits), labels);
}

/// Plain-value wrapper over fixed embeddings (no gradients involved).
inline Real autoencoder_loss(const NegativeSampleSet& samples, const Tensor& embeddings,
                             const Tensor& relation_diag) {
    Tape tape;
    Var loss = autoencoder_loss(tape, samples, tape.constant(embeddings),
                                tape.constant(relation_diag));
    return loss.value()[0];
}

// ---------------------------------------------------------------------------
// Ranking metrics
// ---------------------------------------------------------------------------

/// Probability that a uniformly chosen positive outranks a uniformly chosen
/// negative, with ties counted half (midrank convention).
inline double rank_auc(std::span<const double> positives, std::span<const double> negatives) {
    if (positives.empty() || negatives.empty())
        fail("kgae", "ranking needs at least one positive and one negative score");
    double credit = 0;
    for (double p : positives)
        for (double n : negatives) {
            if (p > n)
                credit += 1;
            else if (p == n)
                credit += 0.5;
        }
    return credit / (static_cast<double>(positives.size()) * static_cast<double>(negatives.size()));
}

/// Ranking oracle used by the pretraining checks: each held-out edge is
/// scored against every single-slot corruption of itself, skipping
/// corruptions that are true edges of the graph or reverses of true edges
/// (the decoder is symmetric, so a reverse is indistinguishable from its
/// edge and cannot meaningfully be ranked against it). Comparisons are
/// grouped per held-out edge; ties earn half credit.
inline double exhaustive_holdout_auc(const kg::KnowledgeGraph& graph,
                                     std::span<const kg::Triple> holdout,
                                     const Tensor& embeddings, const Tensor& relation_diag) {
    if (holdout.empty()) fail("kgae", "no held-out edges to score");
    std::set<kg::Triple> closure;
    for (const kg::Triple& t : graph.triples()) {
        closure.insert(t);
        closure.insert({t.tail, t.rel, t.head});
    }
    double credit = 0;
    std::size_t pairs = 0;
    auto consider = [&](Real positive_score, const kg::Triple& candidate) {
        if (closure.count(candidate)) return;
        const Real s = distmult_score(embeddings, candidate.head, candidate.rel, candidate.tail,
                                      relation_diag);
        if (positive_score > s)
            credit += 1;
        else if (positive_score == s)
            credit += 0.5;
        pairs += 1;
    };
    for (const kg::Triple& pos : holdout) {
        const Real sp = distmult_score(embeddings, pos.head, pos.rel, pos.tail, relation_diag);
        for (kg::NodeId i = 0; i < graph.concept_count(); ++i)
            if (i != pos.head) consider(sp, {i, pos.rel, pos.tail});
        for (kg::NodeId j = 0; j < graph.concept_count(); ++j)
            if (j != pos.tail) consider(sp, {pos.head, pos.rel, j});
        for (kg::RelId r = 0; r < graph.relation_count(); ++r)
            if (r != pos.rel) consider(sp, {pos.head, r, pos.tail});
    }
    if (pairs == 0) fail("kgae", "every corruption of the held-out edges is itself a true edge");
    return credit / static_cast<double>(pairs);
}

// ---------------------------------------------------------------------------
// Pretraining
// ---------------------------------------------------------------------------

struct PretrainConfig {
    std::size_t feature_dim = 100;
    std::size_t epochs = 200;
    Real lr = Real(1e-2);
    Real edge_keep_prob = Real(0.5); // per-epoch message/sample subset rate
    Real holdout_fraction = Real(0.1);
    std::string prefix = "kgae/";
    /// Optional per-epoch observer (epoch, |message subset|, sample set).
    std::function<void(std::size_t, std::size_t, const NegativeSampleSet&)> sample_observer;
};

struct EpochMetrics {
    std::size_t epoch = 0;
    double loss = 0;
    std::optional<double> auc; // absent when the holdout split is empty
};

struct PretrainResult {
    ParamStore params;
    std::vector<EpochMetrics> history;
    std::vector<kg::Triple> train_triples;
    std::vector<kg::Triple> holdout_triples;
};

/// Pretrains the autoencoder. Per epoch: resample a message subset from the
/// training split (each edge kept independently with edge_keep_prob), encode
/// over that subset, corrupt it into a balanced sample set, and take one
/// full-batch Adam step on the classification loss. A seeded holdout split
/// (never trained on, never passed as messages) is scored after each step
/// against one random corruption per edge for a progress AUC.
///
/// Seed layout: the caller stream is never advanced; the split uses
/// derive("split"), initialisation derive("init"), epoch e's subset and
/// corruption draws derive("epoch").derive(e), and its holdout corruption
/// derive("auc").derive(e).
inline PretrainResult pretrain_kgae(const kg::KnowledgeGraph& graph, const PretrainConfig& config,
                                    RngStream& rng) {
    if (graph.concept_count() == 0) fail("kgae", "cannot pretrain on an empty graph");
    if (graph.triple_count() == 0) fail("kgae", "cannot pretrain on a graph with no edges");
    if (!(config.edge_keep_prob > 0 && config.edge_keep_prob <= 1))
        fail("kgae", "edge keep probability must be in (0, 1]");
    if (!(config.holdout_fraction >= 0 && config.holdout_fraction < 1))
        fail("kgae", "holdout fraction must be in [0, 1)");

    PretrainResult result;

    // Seeded split: shuffle edge indices, peel off the holdout share.
    const auto& all = graph.triples();
    std::vector<std::size_t> order(all.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    RngStream split_rng = rng.derive("split");
    split_rng.shuffle(order);
    const std::size_t n_holdout =
        static_cast<std::size_t>(config.holdout_fraction * static_cast<Real>(all.size()));
    std::vector<std::size_t> holdout_idx(order.begin(), order.begin() + n_holdout);
    std::vector<std::size_t> train_idx(order.begin() + n_holdout, order.end());
    std::sort(holdout_idx.begin(), holdout_idx.end());
    std::sort(train_idx.begin(), train_idx.end());
    for (std::size_t i : holdout_idx) result.holdout_triples.push_back(all[i]);
    for (std::size_t i : train_idx) result.train_triples.push_back(all[i]);
    if (result.train_triples.empty()) fail("kgae", "holdout split left no edges to train on");

    RngStream init_rng = rng.derive("init");
    init_autoencoder_params(result.params, config.prefix, graph, config.feature_dim, init_rng);

    Adam opt(AdamConfig{config.lr, Real(0.9), Real(0.999), Real(1e-8)});
    const std::string diag_name = config.prefix + "decoder/relation_diag";

    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        RngStream epoch_rng = rng.derive("epoch").derive(epoch);

        std::vector<kg::Triple> subset;
        for (int attempt = 0; attempt < 1000 && subset.empty(); ++attempt) {
            for (const kg::Triple& t : result.train_triples)
                if (epoch_rng.bernoulli(config.edge_keep_prob)) subset.push_back(t);
        }
        if (subset.empty()) fail("kgae", "edge resampling kept selecting an empty message set");

        NegativeSampleSet samples = sample_negatives(subset, graph, epoch_rng);
        if (config.sample_observer) config.sample_observer(epoch, subset.size(), samples);

        Tape tape;
        Var h = rgcn_forward(tape, graph, result.params, config.prefix, subset);
        Var loss = autoencoder_loss(tape, samples, h, tape.param(result.params, diag_name));
        const double loss_value = static_cast<double>(loss.value()[0]);
        result.params.zero_grads();
        tape.backward(loss);
        result.params.fill_missing_grads();
        opt.step(result.params);

        EpochMetrics metrics;
        metrics.epoch = epoch;
        metrics.loss = loss_value;
        if (!result.holdout_triples.empty()) {
            Tape eval;
            Var h_eval =
                rgcn_forward(eval, graph, result.params, config.prefix, result.train_triples);
            const Tensor& emb = h_eval.value();
            const Tensor& diag = result.params.tensor(diag_name);
            RngStream auc_rng = rng.derive("auc").derive(epoch);
            NegativeSampleSet pairs = sample_negatives(result.holdout_triples, graph, auc_rng);
            std::vector<double> pos, neg;
            for (const TripleSample& s : pairs.samples) {
                const double score = static_cast<double>(
                    distmult_score(emb, s.triple.head, s.triple.rel, s.triple.tail, diag));
                (s.label ? pos : neg).push_back(score);
            }
            metrics.auc = rank_auc(pos, neg);
        }
        result.history.push_back(metrics);
    }
    return result;
}

/// Full-graph encoder pass: messages over every edge of the graph. The
/// returned table is plain data; downstream consumers install it as a
/// non-trainable entry so gradients can never reach it.
inline Tensor export_concept_features(const kg::KnowledgeGraph& graph, ParamStore& store,
                                      const std::string& prefix = "kgae/") {
    Tape tape;
    Var h = rgcn_forward(tape, graph, store, prefix, graph.triples());
    return h.value();
}

// ---------------------------------------------------------------------------
// Concept-feature table round trip
// ---------------------------------------------------------------------------

/// Writes one row per concept, `surface<TAB>v0<TAB>v1...`, in node-id order.
/// Values print in shortest round-trip form, so a save/load cycle reproduces
/// the tensor exactly and identical runs produce identical files.
inline void write_concept_features(std::ostream& out, const kg::KnowledgeGraph& graph,
                                   const Tensor& features) {
    if (features.shape().size() != 2 || features.shape()[0] != graph.concept_count())
        fail("kgae", "feature table must have one row per concept (" +
                         std::to_string(graph.concept_count()) + " expected)");
    const std::size_t dim = features.shape()[1];
    if (dim == 0) fail("kgae", "feature table must have at least one column");
    for (std::size_t i = 0; i < graph.concept_count(); ++i) {
        const std::string& surface = graph.concept_surface(static_cast<kg::NodeId>(i));
        if (surface.find('\t') != std::string::npos || surface.find('\n') != std::string::npos)
            fail("kgae", "concept surface contains a tab or newline: " + surface);
        out << surface;
        for (std::size_t c = 0; c < dim; ++c) out << '\t' << format_double(features(i, c));
        out << '\n';
    }
    if (!out) fail("kgae", "write error while saving the concept-feature table");
}

inline void save_concept_features(const std::string& path, const kg::KnowledgeGraph& graph,
                                  const Tensor& features) {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail("kgae", "cannot open feature table for writing: " + path);
    write_concept_features(out, graph, features);
}

/// Reads a table written by write_concept_features and validates it against
/// `graph`: same concept count, surfaces matching node-id order, and a
/// consistent feature width. This makes stale or mismatched feature files
/// fail loudly instead of silently mis-aligning node ids.
inline Tensor read_concept_features(std::istream& in, const kg::KnowledgeGraph& graph) {
    std::vector<Real> values;
    std::size_t dim = 0, row = 0;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<std::string> fields;
        std::size_t start = 0;
        while (true) {
            const auto tab = line.find('\t', start);
            fields.push_back(line.substr(start, tab - start));
            if (tab == std::string::npos) break;
            start = tab + 1;
        }
        if (fields.size() < 2)
            fail("kgae", "feature table line " + std::to_string(line_no) +
                             ": expected a surface and at least one value");
        if (row >= graph.concept_count())
            fail("kgae", "feature table has more rows than the graph has concepts (" +
                             std::to_string(graph.concept_count()) + ")");
        const std::string& expected = graph.concept_surface(static_cast<kg::NodeId>(row));
        if (fields[0] != expected)
            fail("kgae", "feature table line " + std::to_string(line_no) + ": surface '" +
                             fields[0] + "' does not match concept " + std::to_string(row) +
                             " ('" + expected + "') — the table belongs to a different graph");
        if (dim == 0) dim = fields.size() - 1;
        else if (fields.size() - 1 != dim)
            fail("kgae", "feature table line " + std::to_string(line_no) + ": expected " +
                             std::to_string(dim) + " values, found " +
                             std::to_string(fields.size() - 1));
        for (std::size_t c = 1; c < fields.size(); ++c)
            values.push_back(static_cast<Real>(parse_double(fields[c], "kgae")));
        ++row;
    }
    if (row != graph.concept_count())
        fail("kgae", "feature table has " + std::to_string(row) + " rows but the graph has " +
                         std::to_string(graph.concept_count()) + " concepts");
    Tensor out({row, dim});
    std::copy(values.begin(), values.end(), out.data().begin());
    return out;
}

inline Tensor load_concept_features(const std::string& path, const kg::KnowledgeGraph& graph) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail("kgae", "cannot open feature table: " + path);
    return read_concept_features(in, graph);
}

} // namespace stancekit::kgae
