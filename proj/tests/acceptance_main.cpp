// Acceptance gate: one line per criterion, [PASS]/[FAIL]/[SKIP], exit 0 only
// when nothing failed. Each criterion is self-contained and enforces its own
// wall-clock budget where one is defined.

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "stancekit/cli.hpp"
#include "stancekit/csv.hpp"
#include "stancekit/evalkit.hpp"
#include "stancekit/grad_check.hpp"
#include "stancekit/kgae.hpp"
#include "stancekit/kgraph.hpp"
#include "stancekit/stance.hpp"
#include "stancekit/textenc.hpp"

using namespace stancekit;
namespace fs = std::filesystem;

namespace {

// ---------------------------------------------------------------------------
// Tiny assertion framework
// ---------------------------------------------------------------------------

struct CheckFailure : std::runtime_error {
    explicit CheckFailure(const std::string& msg) : std::runtime_error(msg) {}
};

struct Skip : std::runtime_error {
    explicit Skip(const std::string& msg) : std::runtime_error(msg) {}
};

void expect(bool cond, const std::string& msg) {
    if (!cond) throw CheckFailure(msg);
}

std::string fmt(double v) { return format_double(v); }

// ---------------------------------------------------------------------------
// Shared fixtures
// ---------------------------------------------------------------------------

/// Two 4-node blocks; both relations connect every in-block pair, self-loops
/// included (40 edges). An edge model that clusters the blocks can reject
/// every cross-block corruption, which is what the link-prediction criterion
/// measures.
kg::KnowledgeGraph two_block_graph() {
    kg::KnowledgeGraph::Builder b;
    for (int i = 0; i < 8; ++i) b.intern_concept("n" + std::to_string(i));
    const kg::RelId r0 = b.intern_relation("r0");
    const kg::RelId r1 = b.intern_relation("r1");
    for (kg::NodeId base : {kg::NodeId(0), kg::NodeId(4)})
        for (kg::NodeId i = 0; i < 4; ++i)
            for (kg::NodeId j = i; j < 4; ++j) {
                b.add_triple(base + i, r0, base + j);
                b.add_triple(base + i, r1, base + j);
            }
    return b.build();
}

/// The synthetic benchmark plus the shared sentiment encoder, built once and
/// reused by the criteria that exercise the full pipeline. Streams: suite
/// from RngStream(42).derive("suite"), sentiment pretraining from
/// RngStream(42).derive("sentiment") — the sentiment encoder is a fixed
/// resource shared by every run, like any pretrained checkpoint.
struct SuiteWorld {
    evalkit::SyntheticSuite suite;
    std::vector<evalkit::StanceExample> train, dev, test;
    text::Vocabulary sent_vocab;
    ParamStore sent_store;
};

SuiteWorld& suite_world() {
    static std::unique_ptr<SuiteWorld> world;
    if (!world) {
        auto w = std::make_unique<SuiteWorld>();
        RngStream root(42);
        w->suite = evalkit::generate_synthetic_suite(evalkit::SyntheticConfig{},
                                                     root.derive("suite"));
        w->train = evalkit::filter_split(w->suite.examples, evalkit::Split::train);
        w->dev = evalkit::filter_split(w->suite.examples, evalkit::Split::dev);
        w->test = evalkit::filter_split(w->suite.examples, evalkit::Split::test);
        std::vector<std::string> corpus_texts;
        for (const auto& doc : w->suite.sentiment_corpus) corpus_texts.push_back(doc.text);
        w->sent_vocab = text::Vocabulary::build(corpus_texts);
        RngStream sent_rng = root.derive("sentiment");
        w->sent_store =
            text::pretrain_sentiment(w->suite.sentiment_corpus, w->sent_vocab, w->suite.lexicon,
                                     evalkit::synthetic_sentiment_config(), sent_rng);
        world = std::move(w);
    }
    return *world;
}

evalkit::PipelineConfig make_pipe(const SuiteWorld& w, stance::ModelVariant variant) {
    evalkit::PipelineConfig pipe;
    pipe.kg_pretrain = evalkit::synthetic_kg_config();
    pipe.stance_cfg = evalkit::synthetic_stance_config();
    pipe.variant = variant;
    pipe.pos = &w.suite.pos;
    pipe.sentiment = &w.sent_store;
    pipe.sentiment_vocab = &w.sent_vocab;
    return pipe;
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw CheckFailure("cannot read " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

// ---------------------------------------------------------------------------
// Criterion 1 — finite-difference gradient verification
// ---------------------------------------------------------------------------

std::string criterion_gradients() {
    // Graph-autoencoder loss on a 5-node graph: every parameter of both
    // convolution layers, the entity embeddings, and the relation diagonals
    // must agree with central differences.
    kg::KnowledgeGraph::Builder b;
    for (int i = 0; i < 5; ++i) b.intern_concept("n" + std::to_string(i));
    const auto r0 = b.intern_relation("r0");
    const auto r1 = b.intern_relation("r1");
    b.add_triple(0, r0, 1);
    b.add_triple(1, r0, 2);
    b.add_triple(2, r1, 3);
    b.add_triple(3, r1, 4);
    b.add_triple(4, r0, 0);
    b.add_triple(2, r1, 2);
    const kg::KnowledgeGraph g = b.build();

    ParamStore store;
    RngStream rng(314);
    kgae::init_autoencoder_params(store, "kg/", g, 3, rng);
    const std::vector<kg::Triple> subset(g.triples().begin(), g.triples().begin() + 5);
    RngStream sample_rng(8);
    const kgae::NegativeSampleSet samples = kgae::sample_negatives(subset, g, sample_rng);
    auto run_ae = [&](bool backward) {
        Tape tape;
        Var h = kgae::rgcn_forward(tape, g, store, "kg/", subset);
        Var loss = kgae::autoencoder_loss(tape, samples, h,
                                          tape.param(store, "kg/decoder/relation_diag"));
        if (backward) tape.backward(loss);
        return static_cast<double>(loss.value()[0]);
    };
    const GradCheckReport ae_report = check_gradients(
        store, [&] { return run_ae(false); }, [&] { store.zero_grads(); run_ae(true); }, 1e-5,
        24);
    expect(ae_report.items.size() == store.size(),
           "autoencoder check skipped a parameter group");
    expect(ae_report.within(1e-4), "autoencoder worst relative error " +
                                       fmt(ae_report.worst_rel_err) + " is not below 1e-4");

    // Total stance loss at toy dimensions: every trainable parameter agrees
    // with central differences; frozen parameters receive no gradient.
    kg::KnowledgeGraph::Builder sb;
    const auto apple = sb.intern_concept("apple");
    const auto fruit = sb.intern_concept("fruit");
    const auto vitamin = sb.intern_concept("vitamin");
    const auto rock = sb.intern_concept("rock");
    const auto isa = sb.intern_relation("IsA");
    const auto hasa = sb.intern_relation("HasA");
    sb.add_triple(apple, isa, fruit);
    sb.add_triple(fruit, hasa, vitamin);
    sb.add_triple(vitamin, hasa, vitamin);
    sb.add_triple(rock, isa, rock);
    const kg::KnowledgeGraph graph = sb.build();
    const Tensor features = Tensor::matrix_of(4, 3, {1, 0, 0, 0, 1, 0, 0, 0, 1, 5, 5, 5});
    kg::PosLexicon pos;
    for (const char* n : {"apple", "fruit", "vitamin", "rock", "product", "stores", "movie"})
        pos.add(n, kg::PartOfSpeech::noun);
    pos.add("tasty", kg::PartOfSpeech::adjective);

    text::Vocabulary sent_vocab =
        text::Vocabulary::build({"good bad movie apple tasty product great terrible"});
    text::EncoderConfig sent_cfg;
    sent_cfg.vocab_size = sent_vocab.size();
    sent_cfg.d_model = 8;
    sent_cfg.n_blocks = 1;
    sent_cfg.n_heads = 2;
    sent_cfg.d_ff = 16;
    sent_cfg.max_len = 10;
    ParamStore sent_store;
    RngStream sent_rng(7);
    text::init_encoder_params(sent_store, "sent/", sent_cfg, sent_rng, /*trainable=*/false);

    stance::StanceResources res;
    res.graph = &graph;
    res.concept_features = &features;
    res.pos = &pos;
    res.sentiment = &sent_store;
    res.sentiment_vocab = &sent_vocab;

    stance::StanceConfig cfg;
    cfg.context = sent_cfg;
    cfg.context.vocab_size = 0;
    cfg.sentiment = sent_cfg;

    const std::vector<stance::LabeledExample> batch = {
        {"a", "apple tasty good movie", "fruit", stance::StanceLabel::Pro},
        {"b", "terrible rock product", "rock", stance::StanceLabel::Con},
        {"c", "the vitamin stores", "vitamin", stance::StanceLabel::Neu},
    };
    const text::Vocabulary ctx_vocab = text::Vocabulary::build(
        {"apple tasty good movie terrible rock product the vitamin stores fruit"});
    RngStream rng2(99);
    stance::StanceModel model =
        stance::init_stance_model(cfg, stance::ModelVariant::full(), res, ctx_vocab, rng2);
    const auto prep = stance::prepare_examples(model, res, batch);
    const std::vector<std::size_t> idx{0, 1, 2};
    auto loss = [&]() {
        Tape tape;
        return static_cast<double>(stance::stance_batch(tape, model, prep, idx).total.value()[0]);
    };
    auto populate = [&]() {
        Tape tape;
        stance::BatchOutput out = stance::stance_batch(tape, model, prep, idx);
        model.store.zero_grads();
        tape.backward(out.total);
        model.store.fill_missing_grads();
    };
    const GradCheckReport st_report = check_gradients(model.store, loss, populate, 1e-5, 24);
    expect(st_report.items.size() == model.store.trainable_names().size(),
           "stance check skipped a trainable parameter");
    expect(st_report.within(1e-4), "stance worst relative error " +
                                       fmt(st_report.worst_rel_err) + " is not below 1e-4");
    populate();
    std::size_t frozen = 0;
    for (const auto& name : model.store.names())
        if (!model.store.trainable(name)) {
            expect(!model.store.has_grad(name), "frozen parameter " + name + " got a gradient");
            ++frozen;
        }
    expect(frozen > 0, "the full variant should freeze the sentiment encoder");

    return "autoencoder worst rel err " + fmt(ae_report.worst_rel_err) + " (" +
           std::to_string(ae_report.items.size()) + " params), stance worst rel err " +
           fmt(st_report.worst_rel_err) + " (" + std::to_string(st_report.items.size()) +
           " trainable, " + std::to_string(frozen) + " frozen untouched)";
}

// ---------------------------------------------------------------------------
// Criterion 2 — closed-form oracles
// ---------------------------------------------------------------------------

std::string criterion_closed_forms() {
    // Edge score: h=(1,2), t=(3,4), diag=(1,0.5) -> logistic(1*3 + 0.5*8) = logistic(7).
    const Real h[2] = {1, 2}, t[2] = {3, 4}, d[2] = {1, 0.5};
    const double s = static_cast<double>(kgae::distmult_score(
        std::span<const Real>(h, 2), std::span<const Real>(d, 2), std::span<const Real>(t, 2)));
    const double logistic7 = 1.0 / (1.0 + std::exp(-7.0));
    expect(std::abs(s - logistic7) < 1e-9,
           "edge score " + fmt(s) + " != logistic(7) = " + fmt(logistic7));

    // Autoencoder loss with every score at probability 0.5 costs ln 2.
    kgae::NegativeSampleSet set;
    set.source_edge_count = 1;
    set.samples = {{{0, 0, 1}, 1}, {{0, 0, 0}, 0}};
    const Tensor zero_emb({2, 3});
    const Tensor diag = Tensor::matrix_of(1, 3, {1, 2, 3});
    const double ae = static_cast<double>(kgae::autoencoder_loss(set, zero_emb, diag));
    expect(std::abs(ae - std::log(2.0)) < 1e-9, "autoencoder loss at 0.5 is " + fmt(ae));

    // Uniform stance probabilities cost ln 3.
    Tape tape;
    Var p = tape.constant(Tensor::matrix_of(1, 3, {Real(1) / 3, Real(1) / 3, Real(1) / 3}));
    Var sl = stance::stance_loss(tape, p, {stance::StanceLabel::Pro});
    const double ln3 = static_cast<double>(sl.value()[0]);
    expect(std::abs(ln3 - std::log(3.0)) < 1e-9, "uniform stance loss is " + fmt(ln3));

    // All-Pro predictions against golds {Pro, Con, Neu}: macro-F1 = 1/6.
    const std::vector<stance::StanceLabel> preds = {
        stance::StanceLabel::Pro, stance::StanceLabel::Pro, stance::StanceLabel::Pro};
    const std::vector<stance::StanceLabel> golds = {
        stance::StanceLabel::Pro, stance::StanceLabel::Con, stance::StanceLabel::Neu};
    const double f1 = stance::f1_summary(preds, golds).macro_f1;
    expect(std::abs(f1 - 1.0 / 6.0) < 1e-12, "all-Pro macro-F1 is " + fmt(f1));

    return "edge score = logistic(7), loss(0.5) = ln 2, uniform stance loss = ln 3, "
           "all-Pro macro-F1 = 1/6";
}

// ---------------------------------------------------------------------------
// Criterion 3 — structural invariants
// ---------------------------------------------------------------------------

std::string criterion_invariants() {
    // (a) Every pretraining epoch trains on exactly twice the sampled edge
    // subset: one corruption per positive.
    kg::KnowledgeGraph g = two_block_graph();
    kgae::PretrainConfig cfg;
    cfg.feature_dim = 8;
    cfg.epochs = 50;
    cfg.holdout_fraction = Real(0.1);
    std::size_t epochs_seen = 0;
    bool sizes_ok = true, balance_ok = true;
    cfg.sample_observer = [&](std::size_t, std::size_t edge_count,
                              const kgae::NegativeSampleSet& set) {
        ++epochs_seen;
        sizes_ok = sizes_ok && set.samples.size() == 2 * edge_count &&
                   set.source_edge_count == edge_count;
        std::size_t pos = 0;
        for (const auto& sample : set.samples) pos += sample.label;
        balance_ok = balance_ok && pos * 2 == set.samples.size();
    };
    RngStream rng(11);
    (void)kgae::pretrain_kgae(g, cfg, rng);
    expect(epochs_seen == cfg.epochs, "observer missed epochs");
    expect(sizes_ok, "an epoch's training multiset was not twice its edge subset");
    expect(balance_ok, "positives and corruptions were not balanced");

    // (b) The edge score is exactly symmetric in its endpoints.
    RngStream srng(17);
    for (int trial = 0; trial < 1000; ++trial) {
        Real hv[6], tv[6], dv[6];
        for (int i = 0; i < 6; ++i) {
            hv[i] = static_cast<Real>(srng.normal());
            tv[i] = static_cast<Real>(srng.normal());
            dv[i] = static_cast<Real>(srng.normal());
        }
        const Real a = kgae::distmult_score(std::span<const Real>(hv, 6),
                                            std::span<const Real>(dv, 6),
                                            std::span<const Real>(tv, 6));
        const Real b = kgae::distmult_score(std::span<const Real>(tv, 6),
                                            std::span<const Real>(dv, 6),
                                            std::span<const Real>(hv, 6));
        expect(a == b, "edge score asymmetric at trial " + std::to_string(trial));
    }

    // (c) Softmax rows are normalized to 1 within 1e-12.
    RngStream prng(23);
    Tensor logits({40, 17});
    for (Real& v : logits.data()) v = static_cast<Real>(prng.normal() * 5);
    Tape tape;
    Var sm = tape.softmax_rows(tape.constant(logits));
    for (std::size_t r = 0; r < 40; ++r) {
        double sum = 0;
        for (std::size_t c = 0; c < 17; ++c) sum += static_cast<double>(sm.value()(r, c));
        expect(std::abs(sum - 1.0) < 1e-12,
               "softmax row " + std::to_string(r) + " sums to " + fmt(sum));
    }

    // (d) Subgraph extraction matches a brute-force filter on a random graph
    // with ten thousand triples.
    kg::KnowledgeGraph::Builder rb;
    const std::size_t n_concepts = 600;
    for (std::size_t i = 0; i < n_concepts; ++i) rb.intern_concept("c" + std::to_string(i));
    for (int r = 0; r < 4; ++r) rb.intern_relation("r" + std::to_string(r));
    RngStream grng(29);
    std::set<std::tuple<kg::NodeId, kg::RelId, kg::NodeId>> seen;
    while (seen.size() < 10000) {
        const auto h = static_cast<kg::NodeId>(grng.uniform_int(n_concepts));
        const auto rel = static_cast<kg::RelId>(grng.uniform_int(4));
        const auto t = static_cast<kg::NodeId>(grng.uniform_int(n_concepts));
        if (seen.insert({h, rel, t}).second) rb.add_triple(h, rel, t);
    }
    const kg::KnowledgeGraph big = rb.build();
    std::vector<std::string> seed_surfaces;
    std::set<kg::NodeId> seed_ids;
    while (seed_ids.size() < 25) {
        const auto id = static_cast<kg::NodeId>(grng.uniform_int(n_concepts));
        if (seed_ids.insert(id).second) seed_surfaces.push_back(big.concept_surface(id));
    }
    for (const kg::SubgraphMode mode :
         {kg::SubgraphMode::incident, kg::SubgraphMode::vicinity}) {
        std::set<kg::NodeId> allowed = seed_ids;
        if (mode == kg::SubgraphMode::vicinity)
            for (const kg::Triple& t : big.triples()) {
                if (seed_ids.count(t.head)) allowed.insert(t.tail);
                if (seed_ids.count(t.tail)) allowed.insert(t.head);
            }
        std::multiset<std::string> oracle;
        for (const kg::Triple& t : big.triples())
            if (allowed.count(t.head) || allowed.count(t.tail))
                oracle.insert(big.concept_surface(t.head) + "|" + big.relations()[t.rel] + "|" +
                              big.concept_surface(t.tail));
        const kg::SubgraphResult sub = kg::extract_subgraph(big, seed_surfaces, mode);
        std::multiset<std::string> got;
        for (const kg::Triple& t : sub.graph.triples())
            got.insert(sub.graph.concept_surface(t.head) + "|" + sub.graph.relations()[t.rel] +
                       "|" + sub.graph.concept_surface(t.tail));
        expect(got == oracle, "subgraph extraction disagrees with brute force");
        expect(!oracle.empty(), "degenerate oracle: empty subgraph");
    }

    return "2|E'| multiset over 50 epochs, 1000 exact symmetries, 40 softmax rows at 1e-12, "
           "brute-force subgraph match on 10000 triples (both modes)";
}

// ---------------------------------------------------------------------------
// Criterion 4 — link prediction learns a two-block graph
// ---------------------------------------------------------------------------

std::string criterion_link_prediction() {
    const kg::KnowledgeGraph g = two_block_graph();
    kgae::PretrainConfig cfg;
    cfg.feature_dim = 16;
    cfg.epochs = 200;
    cfg.lr = Real(5e-3);
    cfg.holdout_fraction = Real(0.05);

    RngStream rng(4242);
    const kgae::PretrainResult res = kgae::pretrain_kgae(g, cfg, rng);
    Tape eval;
    const Tensor emb = kgae::rgcn_forward(eval, g, res.params, "kgae/", res.train_triples).value();
    const double trained = kgae::exhaustive_holdout_auc(
        g, res.holdout_triples, emb, res.params.tensor("kgae/decoder/relation_diag"));

    kgae::PretrainConfig cfg0 = cfg;
    cfg0.epochs = 0;
    RngStream rng0(4242);
    const kgae::PretrainResult init = kgae::pretrain_kgae(g, cfg0, rng0);
    Tape eval0;
    const Tensor emb0 =
        kgae::rgcn_forward(eval0, g, init.params, "kgae/", init.train_triples).value();
    // Two held-out edges make a noisy estimate, so the at-initialization
    // number pools every edge of the graph (~400 ranking pairs).
    const double at_init = kgae::exhaustive_holdout_auc(
        g, g.triples(), emb0, init.params.tensor("kgae/decoder/relation_diag"));

    expect(trained >= 0.9, "trained holdout AUC " + fmt(trained) + " is below 0.9");
    expect(at_init > 0.2 && at_init < 0.8,
           "at-initialization AUC " + fmt(at_init) + " is not near chance");
    return "holdout AUC " + fmt(trained) + " after 200 epochs vs " + fmt(at_init) +
           " at initialization";
}

// ---------------------------------------------------------------------------
// Criterion 5 — ablation grid on the synthetic suite
// ---------------------------------------------------------------------------

std::string criterion_ablation_grid() {
    SuiteWorld& w = suite_world();
    RngStream root(42);
    const std::uint64_t seeds[3] = {1, 2, 3};
    double full[3], no_sent[3], no_kg[3];
    for (int i = 0; i < 3; ++i) {
        const RngStream run_rng = root.derive("seed").derive(seeds[i]);
        full[i] = evalkit::run_stance_pipeline(w.suite.graph, w.train, w.dev, w.test,
                                               make_pipe(w, stance::ModelVariant::full()),
                                               run_rng)
                      .stance.best_dev_macro_f1;
        no_sent[i] =
            evalkit::run_stance_pipeline(w.suite.graph, w.train, w.dev, w.test,
                                         make_pipe(w, stance::ModelVariant::without_sentiment()),
                                         run_rng)
                .stance.best_dev_macro_f1;
        no_kg[i] = evalkit::run_stance_pipeline(w.suite.graph, w.train, w.dev, w.test,
                                                make_pipe(w, stance::ModelVariant::without_kg()),
                                                run_rng)
                       .stance.best_dev_macro_f1;
    }
    double gap_sent = 0, gap_kg = 0;
    std::string table;
    for (int i = 0; i < 3; ++i) {
        expect(full[i] >= 0.9, "seed " + std::to_string(seeds[i]) + ": full-variant dev macro-F1 " +
                                   fmt(full[i]) + " is below 0.9");
        expect(no_sent[i] < full[i], "seed " + std::to_string(seeds[i]) +
                                         ": the no-sentiment variant is not strictly worse");
        expect(no_kg[i] < full[i], "seed " + std::to_string(seeds[i]) +
                                       ": the no-knowledge variant is not strictly worse");
        gap_sent += (full[i] - no_sent[i]) / 3.0;
        gap_kg += (full[i] - no_kg[i]) / 3.0;
        if (i) table += " ";
        table += "s" + std::to_string(seeds[i]) + ":" + fmt(full[i]) + "/" + fmt(no_sent[i]) +
                 "/" + fmt(no_kg[i]);
    }
    expect(gap_sent >= 0.03, "mean no-sentiment gap " + fmt(gap_sent) + " is below 0.03");
    expect(gap_kg >= 0.03, "mean no-knowledge gap " + fmt(gap_kg) + " is below 0.03");
    return "dev macro-F1 full/no-sentiment/no-knowledge per seed [" + table +
           "], mean gaps sentiment " + fmt(gap_sent) + ", knowledge " + fmt(gap_kg);
}

// ---------------------------------------------------------------------------
// Criterion 6 — knowledge coverage helps
// ---------------------------------------------------------------------------

std::string criterion_coverage() {
    SuiteWorld& w = suite_world();
    RngStream root(42);
    const auto points = evalkit::coverage_ablation(w.suite.graph, {10, 100}, w.train, w.dev,
                                                   w.test, make_pipe(w, stance::ModelVariant::full()),
                                                   root.derive("coverage"));
    expect(points.size() == 2, "expected two coverage points");
    expect(points[0].zero_shot_macro_f1.has_value(), "10% coverage point is undefined");
    expect(points[1].zero_shot_macro_f1.has_value(), "100% coverage point is undefined");
    const double low = *points[0].zero_shot_macro_f1;
    const double high = *points[1].zero_shot_macro_f1;
    expect(high > low, "zero-shot macro-F1 at 100% coverage (" + fmt(high) +
                           ") does not exceed 10% coverage (" + fmt(low) + ")");
    return "zero-shot macro-F1 " + fmt(low) + " at 10% vs " + fmt(high) + " at 100% coverage";
}

// ---------------------------------------------------------------------------
// Criterion 7 — sentiment/stance concordance grid
// ---------------------------------------------------------------------------

std::string criterion_sentiment_stance() {
    SuiteWorld& w = suite_world();
    RngStream root(42);
    const evalkit::PipelineResult run = evalkit::run_stance_pipeline(
        w.suite.graph, w.train, w.dev, w.test, make_pipe(w, stance::ModelVariant::full()),
        root.derive("run"));
    std::vector<std::string> docs;
    std::vector<stance::StanceLabel> golds, preds;
    for (const auto& ex : w.test) {
        docs.push_back(ex.document);
        golds.push_back(ex.gold);
    }
    for (const auto& p : run.test_predictions) preds.push_back(p.predicted);
    const evalkit::SentimentStanceMatrix mat =
        evalkit::sentiment_stance_matrix(preds, golds, docs, w.suite.lexicon);

    const nlohmann::json j = evalkit::matrix_json(mat);
    expect(j.at("rows") == nlohmann::json({"Pos", "Neg", "Neu"}) &&
               j.at("cols") == nlohmann::json({"Pro", "Con", "Neu"}) &&
               j.at("accuracy").size() == 3 && j.at("accuracy")[0].size() == 3,
           "matrix is not a 3x3 sentiment-by-stance grid");

    const auto cell = [&](evalkit::DocSentiment s, stance::StanceLabel g) {
        const auto acc = mat.accuracy(s, g);
        expect(acc.has_value(), "matrix cell has no examples");
        return *acc;
    };
    const double pos_pro = cell(evalkit::DocSentiment::positive, stance::StanceLabel::Pro);
    const double neg_con = cell(evalkit::DocSentiment::negative, stance::StanceLabel::Con);
    const double pos_con = cell(evalkit::DocSentiment::positive, stance::StanceLabel::Con);
    const double neg_pro = cell(evalkit::DocSentiment::negative, stance::StanceLabel::Pro);
    const double concordant = std::min(pos_pro, neg_con);
    const double discordant = std::max(pos_con, neg_pro);
    expect(concordant > discordant,
           "concordant cells (" + fmt(pos_pro) + ", " + fmt(neg_con) +
               ") do not beat discordant cells (" + fmt(pos_con) + ", " + fmt(neg_pro) + ")");
    return "accuracy (Pos,Pro)=" + fmt(pos_pro) + " (Neg,Con)=" + fmt(neg_con) +
           " vs (Pos,Con)=" + fmt(pos_con) + " (Neg,Pro)=" + fmt(neg_pro);
}

// ---------------------------------------------------------------------------
// Criterion 8 — optional real-data scale check (environment-gated)
// ---------------------------------------------------------------------------

std::string criterion_real_data() {
    const char* train_csv = std::getenv("STANCEKIT_VAST_TRAIN_CSV");
    const char* kg_csv = std::getenv("STANCEKIT_CONCEPTNET_CSV");
    const char* pos_tsv = std::getenv("STANCEKIT_POS_LEXICON");
    if (!train_csv || !kg_csv || !pos_tsv)
        throw Skip("set STANCEKIT_VAST_TRAIN_CSV, STANCEKIT_CONCEPTNET_CSV and "
                   "STANCEKIT_POS_LEXICON to run the real-data scale check");

    std::ifstream in(train_csv);
    expect(in.good(), std::string("cannot open ") + train_csv);
    const CsvTable table = CsvTable::read(in);
    expect(table.rows.size() == 13477, "train split has " + std::to_string(table.rows.size()) +
                                           " rows, expected 13477");

    auto pick = [&](std::initializer_list<const char*> names) -> std::optional<std::size_t> {
        for (const char* n : names)
            if (auto c = table.column(n)) return c;
        return std::nullopt;
    };
    const auto doc_col = pick({"post", "text", "document"});
    const auto topic_col = pick({"topic_str", "topic", "new_topic"});
    expect(doc_col.has_value() && topic_col.has_value(),
           "cannot locate document/topic columns in the train CSV");

    kg::IngestOptions opt;
    opt.format = kg::IngestOptions::Format::conceptnet_csv;
    const auto [graph, report] = kg::ingest_triples_file(kg_csv, opt);
    const kg::PosLexicon pos = kg::PosLexicon::load_file(pos_tsv);

    std::vector<std::string> texts;
    texts.reserve(table.rows.size() * 2);
    for (const auto& row : table.rows) {
        texts.push_back(row[*doc_col]);
        texts.push_back(row[*topic_col]);
    }
    const auto seeds = kg::extract_seed_terms(texts, pos);
    const kg::SubgraphResult sub = kg::extract_subgraph(graph, seeds, kg::SubgraphMode::vicinity);
    const double concepts = static_cast<double>(sub.graph.concept_count());
    const double edges = static_cast<double>(sub.graph.triple_count());
    expect(concepts >= 3.1e5 * 0.75 && concepts <= 3.1e5 * 1.25,
           "subgraph concepts " + fmt(concepts) + " outside 3.1e5 +- 25%");
    expect(edges >= 7.5e5 * 0.75 && edges <= 7.5e5 * 1.25,
           "subgraph edges " + fmt(edges) + " outside 7.5e5 +- 25%");
    return "13477 train rows; subgraph " + fmt(concepts) + " concepts / " + fmt(edges) +
           " edges";
}

// ---------------------------------------------------------------------------
// Criterion 9 — identical configs reproduce identical logs and artifacts
// ---------------------------------------------------------------------------

void run_cli_chain(const fs::path& dir) {
    const std::string d = dir.string();
    auto run = [&](std::vector<std::string> args) {
        std::ostringstream out, err;
        const int code = cli::run(args, out, err);
        if (code != 0)
            throw CheckFailure("command '" + args[0] + "' failed (" + std::to_string(code) +
                               "): " + err.str());
    };
    run({"gen-synthetic", "--output_dir", d, "--synthetic.few_shot_topics", "2",
         "--synthetic.zero_shot_topics", "2", "--synthetic.aliases_per_topic", "1",
         "--synthetic.junk_words", "4", "--synthetic.junk_hubs", "1",
         "--synthetic.words_per_polarity", "8", "--synthetic.train_counts", "2,2,1,1",
         "--synthetic.eval_counts", "1,1,1,1", "--synthetic.paired_docs_per_split", "1",
         "--synthetic.sentiment_docs", "30"});
    run({"pretrain-sentiment", "--output_dir", d, "--sentiment.corpus", d + "/rated_corpus.tsv",
         "--sentiment.lexicon", d + "/sentiment_lexicon.tsv", "--sentiment.d_model", "8",
         "--sentiment.n_blocks", "1", "--sentiment.n_heads", "2", "--sentiment.d_ff", "16",
         "--sentiment.max_len", "16", "--sentiment.epochs", "2"});
    run({"pretrain-kg", "--output_dir", d, "--kg.graph", d + "/graph.tsv", "--kg.feature_dim",
         "4", "--kg.epochs", "3", "--kg.holdout_fraction", "0"});
    run({"train-stance", "--output_dir", d, "--dataset.train", d + "/dataset.csv",
         "--dataset.dev", d + "/dataset.csv", "--kg.graph", d + "/graph.tsv", "--kg.features",
         d + "/kg_features.tsv", "--kg.pos_lexicon", d + "/pos_lexicon.tsv",
         "--sentiment.checkpoint", d + "/sentiment.ckpt", "--context.d_model", "8",
         "--context.n_blocks", "1", "--context.n_heads", "2", "--context.d_ff", "16",
         "--context.max_len", "16", "--stance.epochs", "2", "--stance.batch_size", "4"});
    run({"evaluate", "--output_dir", d, "--eval.checkpoint", d + "/stance.ckpt",
         "--dataset.test", d + "/dataset.csv", "--kg.graph", d + "/graph.tsv", "--kg.features",
         d + "/kg_features.tsv", "--kg.pos_lexicon", d + "/pos_lexicon.tsv",
         "--sentiment.checkpoint", d + "/sentiment.ckpt"});
    run({"analyze-sentiment-stance", "--output_dir", d, "--analysis.checkpoint",
         d + "/stance.ckpt", "--analysis.lexicon", d + "/sentiment_lexicon.tsv",
         "--dataset.test", d + "/dataset.csv", "--kg.graph", d + "/graph.tsv", "--kg.features",
         d + "/kg_features.tsv", "--kg.pos_lexicon", d + "/pos_lexicon.tsv",
         "--sentiment.checkpoint", d + "/sentiment.ckpt"});
    run({"ablate-kg-coverage", "--output_dir", d, "--dataset.train", d + "/dataset.csv",
         "--dataset.dev", d + "/dataset.csv", "--dataset.test", d + "/dataset.csv", "--kg.graph",
         d + "/graph.tsv", "--kg.pos_lexicon", d + "/pos_lexicon.tsv", "--sentiment.checkpoint",
         d + "/sentiment.ckpt", "--kg.feature_dim", "4", "--kg.epochs", "2",
         "--kg.holdout_fraction", "0", "--context.d_model", "8", "--context.n_blocks", "1",
         "--context.n_heads", "2", "--context.d_ff", "16", "--context.max_len", "16",
         "--stance.epochs", "1", "--coverage.percents", "50,100"});
    std::ofstream dump(dir / "dump.tsv", std::ios::binary);
    dump << "apple\tIsA\tfruit\nfruit\tHasA\tvitamin\nrock\tIsA\tmineral\n";
    dump.close();
    std::ofstream seeds(dir / "seeds.csv", std::ios::binary);
    seeds << "id,document,topic,label\nr1,i love apple pie,fruit,Pro\n";
    seeds.close();
    std::ofstream posf(dir / "pos.tsv", std::ios::binary);
    posf << "apple\tnoun\nfruit\tnoun\npie\tnoun\n";
    posf.close();
    run({"extract-subgraph", "--output_dir", d, "--subgraph.kg", d + "/dump.tsv",
         "--subgraph.pos_lexicon", d + "/pos.tsv", "--subgraph.datasets", d + "/seeds.csv",
         "--dataset.id_column", "id", "--dataset.split_column=", "--dataset.shot_column=",
         "--dataset.phenomenon_columns", "none"});
}

std::string criterion_determinism() {
    const fs::path root = fs::temp_directory_path() / "stancekit-acceptance";
    fs::remove_all(root);
    fs::create_directories(root);
    const fs::path a = root / "a";
    const fs::path b = root / "b";
    run_cli_chain(a);
    run_cli_chain(b);

    const char* logs[] = {"gen-synthetic.metrics.jsonl",
                          "pretrain-sentiment.metrics.jsonl",
                          "pretrain-kg.metrics.jsonl",
                          "train-stance.metrics.jsonl",
                          "evaluate.metrics.jsonl",
                          "analyze-sentiment-stance.metrics.jsonl",
                          "ablate-kg-coverage.metrics.jsonl",
                          "extract-subgraph.metrics.jsonl"};
    for (const char* name : logs)
        expect(read_file(a / name) == read_file(b / name),
               std::string("metrics log differs between identical runs: ") + name);
    const char* artifacts[] = {"dataset.csv", "graph.tsv",      "sentiment.ckpt",
                               "kg_features.tsv", "stance.ckpt", "report.json",
                               "predictions.tsv", "coverage.tsv", "subgraph.tsv",
                               "sentiment_stance_matrix.json"};
    for (const char* name : artifacts)
        expect(read_file(a / name) == read_file(b / name),
               std::string("artifact differs between identical runs: ") + name);
    return "8 command logs and 10 artifacts byte-identical across re-runs";
}

// ---------------------------------------------------------------------------
// Driver
// ---------------------------------------------------------------------------

struct Criterion {
    int id;
    const char* label;
    double limit_seconds; // 0 = no explicit budget
    std::function<std::string()> fn;
};

} // namespace

int main() {
    const std::vector<Criterion> criteria = {
        {1, "finite-difference gradient verification", 30, criterion_gradients},
        {2, "closed-form loss and metric oracles", 0, criterion_closed_forms},
        {3, "sampling, scoring, softmax, and subgraph invariants", 0, criterion_invariants},
        {4, "link prediction separates a two-block graph", 120, criterion_link_prediction},
        {5, "full variant beats both ablations on the synthetic suite", 600,
         criterion_ablation_grid},
        {6, "full knowledge coverage beats 10% coverage", 900, criterion_coverage},
        {7, "sentiment-concordant stance cells score higher", 0, criterion_sentiment_stance},
        {8, "real-data scale check (environment-gated)", 0, criterion_real_data},
        {9, "identical configs reproduce identical logs", 0, criterion_determinism},
    };

    bool all_ok = true;
    for (const auto& c : criteria) {
        const auto t0 = std::chrono::steady_clock::now();
        std::string status = "PASS", detail;
        try {
            detail = c.fn();
        } catch (const Skip& s) {
            status = "SKIP";
            detail = s.what();
        } catch (const std::exception& e) {
            status = "FAIL";
            detail = e.what();
        }
        const double seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (status == "PASS" && c.limit_seconds > 0 && seconds > c.limit_seconds) {
            status = "FAIL";
            detail = "over the " + fmt(c.limit_seconds) + "s budget (" + fmt(seconds) + "s); " +
                     detail;
        }
        if (status == "FAIL") all_ok = false;
        std::ostringstream line;
        line << "[" << status << "] criterion " << c.id << " (" << std::fixed
             << std::setprecision(1) << seconds << "s): " << c.label;
        if (!detail.empty()) line << " — " << detail;
        std::cout << line.str() << "\n" << std::flush;
    }
    std::cout << (all_ok ? "acceptance: all criteria satisfied\n"
                         : "acceptance: FAILURES above\n");
    return all_ok ? 0 : 1;
}
