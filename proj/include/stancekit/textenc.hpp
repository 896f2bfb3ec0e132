#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "stancekit/adam.hpp"
#include "stancekit/error.hpp"
#include "stancekit/param_store.hpp"
#include "stancekit/rng.hpp"
#include "stancekit/tape.hpp"
#include "stancekit/text_util.hpp"

namespace stancekit::text {

// ---------------------------------------------------------------------------
// Vocabulary
// ---------------------------------------------------------------------------

class Vocabulary {
public:
    static constexpr std::size_t kCls = 0;
    static constexpr std::size_t kSep = 1;
    static constexpr std::size_t kPad = 2;
    static constexpr std::size_t kMask = 3;
    static constexpr std::size_t kUnk = 4;
    static constexpr std::size_t kSpecialCount = 5;

    Vocabulary() {
        for (const char* s : {"[CLS]", "[SEP]", "[PAD]", "[MASK]", "[UNK]"}) add(s);
    }

    std::size_t add(std::string_view token) {
        auto it = ids_.find(std::string(token));
        if (it != ids_.end()) return it->second;
        const std::size_t id = tokens_.size();
        tokens_.emplace_back(token);
        ids_.emplace(tokens_.back(), id);
        return id;
    }

    std::optional<std::size_t> find(std::string_view token) const {
        auto it = ids_.find(std::string(token));
        if (it == ids_.end()) return std::nullopt;
        return it->second;
    }

    std::size_t id_or_unk(std::string_view token) const {
        auto it = ids_.find(std::string(token));
        return it == ids_.end() ? kUnk : it->second;
    }

    const std::string& token(std::size_t id) const { return tokens_.at(id); }
    std::size_t size() const { return tokens_.size(); }
    static bool is_special(std::size_t id) { return id < kSpecialCount; }

    /// Word-level vocabulary over the corpus: tokens with count >= min_freq,
    /// added in sorted order so the result is independent of corpus order.
    static Vocabulary build(const std::vector<std::string>& texts, std::size_t min_freq = 1) {
        std::map<std::string, std::size_t> counts;
        for (const auto& text : texts)
            for (auto& tok : word_tokenize(text)) ++counts[tok];
        Vocabulary v;
        for (const auto& [tok, n] : counts)
            if (n >= min_freq) v.add(tok);
        return v;
    }

    /// One token per line; the line number is the id (specials included).
    void save(std::ostream& out) const {
        for (const auto& t : tokens_) out << t << '\n';
    }

    static Vocabulary load(std::istream& in) {
        Vocabulary v;
        std::string line;
        std::size_t line_no = 0;
        while (std::getline(in, line)) {
            if (!line.empty() && line.back() == '\r') line.pop_back();
            if (line_no < kSpecialCount) {
                if (line != v.tokens_[line_no])
                    fail("textenc", "vocabulary file does not start with the reserved tokens");
            } else {
                if (line.empty()) fail("textenc", "empty vocabulary entry at line " + std::to_string(line_no + 1));
                if (v.ids_.count(line)) fail("textenc", "duplicate vocabulary entry: " + line);
                v.add(line);
            }
            ++line_no;
        }
        if (line_no < kSpecialCount) fail("textenc", "vocabulary file too short");
        return v;
    }

private:
    std::vector<std::string> tokens_;
    std::unordered_map<std::string, std::size_t> ids_;
};

// ---------------------------------------------------------------------------
// Tokenization: x = [CLS] d [SEP] t [SEP]
// ---------------------------------------------------------------------------

struct TokenSequence {
    std::vector<std::size_t> ids;      // padded to max_len
    std::vector<std::uint8_t> segment; // 0 = [CLS]+document+first [SEP], 1 = topic+final [SEP]
    std::vector<std::uint8_t> attention; // 1 = real position, 0 = padding
    std::size_t cls_index = 0;
    std::size_t length = 0; // unpadded length
};

inline TokenSequence tokenize(std::string_view document, std::string_view topic,
                              const Vocabulary& vocab, std::size_t max_len) {
    if (max_len < 4) fail("textenc", "max_len must be at least 4");
    const auto topic_tokens = word_tokenize(topic);
    if (topic_tokens.size() > max_len - 3)
        fail("textenc", "topic alone exceeds max_len-3 (" + std::to_string(topic_tokens.size()) +
                            " tokens vs max_len " + std::to_string(max_len) + ")");
    auto doc_tokens = word_tokenize(document);
    const std::size_t doc_budget = max_len - 3 - topic_tokens.size();
    if (doc_tokens.size() > doc_budget) doc_tokens.resize(doc_budget); // truncate from the right

    TokenSequence seq;
    seq.ids.reserve(max_len);
    seq.ids.push_back(Vocabulary::kCls);
    for (const auto& t : doc_tokens) seq.ids.push_back(vocab.id_or_unk(t));
    seq.ids.push_back(Vocabulary::kSep);
    const std::size_t topic_start = seq.ids.size();
    for (const auto& t : topic_tokens) seq.ids.push_back(vocab.id_or_unk(t));
    seq.ids.push_back(Vocabulary::kSep);

    seq.length = seq.ids.size();
    seq.segment.assign(seq.length, 0);
    for (std::size_t i = topic_start; i < seq.length; ++i) seq.segment[i] = 1;
    seq.attention.assign(seq.length, 1);

    seq.ids.resize(max_len, Vocabulary::kPad);
    seq.segment.resize(max_len, 0);
    seq.attention.resize(max_len, 0);
    return seq;
}

/// Inverse of tokenize for display: in-vocabulary tokens joined by spaces,
/// reserved tokens skipped.
inline std::string detokenize(const std::vector<std::size_t>& ids, const Vocabulary& vocab) {
    std::string out;
    for (std::size_t id : ids) {
        if (Vocabulary::is_special(id)) continue;
        if (!out.empty()) out.push_back(' ');
        out += vocab.token(id);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Transformer encoder
// ---------------------------------------------------------------------------

struct EncoderConfig {
    std::size_t vocab_size = 0;
    std::size_t d_model = 128;
    std::size_t n_blocks = 2;
    std::size_t n_heads = 4;
    std::size_t d_ff = 256;
    std::size_t max_len = 256;

    std::size_t head_dim() const {
        if (n_heads == 0 || d_model % n_heads != 0)
            fail("textenc", "d_model must be a positive multiple of n_heads");
        return d_model / n_heads;
    }
};

/// Registers the parameters of one attention block under `block_prefix`
/// (e.g. "ctx/block0/"). Reused by any component that stacks transformer
/// blocks outside a full encoder, such as the stance fusion layer.
inline void init_block_params(ParamStore& store, const std::string& block_prefix,
                              const EncoderConfig& cfg, RngStream& rng, bool trainable = true) {
    cfg.head_dim(); // validates divisibility
    auto mat = [&](const std::string& name, std::size_t r, std::size_t c) {
        store.add(block_prefix + name, glorot_uniform(r, c, {r, c}, rng), trainable);
    };
    auto vec = [&](const std::string& name, std::size_t n, Real value = Real(0)) {
        store.add(block_prefix + name, Tensor({n}, value), trainable);
    };
    for (const char* w : {"Wq", "Wk", "Wv", "Wo"}) mat(w, cfg.d_model, cfg.d_model);
    // No key bias: a shared offset on every key shifts all attention
    // logits in a row by the same amount, which the row softmax cancels,
    // so the parameter would be inert.
    for (const char* v : {"bq", "bv", "bo"}) vec(v, cfg.d_model);
    vec("ln1_g", cfg.d_model, Real(1));
    vec("ln1_b", cfg.d_model);
    mat("ff/W1", cfg.d_model, cfg.d_ff);
    vec("ff/b1", cfg.d_ff);
    mat("ff/W2", cfg.d_ff, cfg.d_model);
    vec("ff/b2", cfg.d_model);
    vec("ln2_g", cfg.d_model, Real(1));
    vec("ln2_b", cfg.d_model);
}

/// Registers every parameter of one encoder under `prefix` ("ctx/", "sent/").
/// Weight matrices are Glorot-uniform, biases zero, layer-norm gains one.
inline void init_encoder_params(ParamStore& store, const std::string& prefix,
                                const EncoderConfig& cfg, RngStream& rng, bool trainable = true) {
    if (cfg.vocab_size == 0) fail("textenc", "encoder vocab_size is unset");
    cfg.head_dim(); // validates divisibility
    auto mat = [&](const std::string& name, std::size_t r, std::size_t c) {
        store.add(prefix + name, glorot_uniform(r, c, {r, c}, rng), trainable);
    };
    mat("emb/token", cfg.vocab_size, cfg.d_model);
    mat("emb/pos", cfg.max_len, cfg.d_model);
    mat("emb/seg", 2, cfg.d_model);
    for (std::size_t b = 0; b < cfg.n_blocks; ++b)
        init_block_params(store, prefix + "block" + std::to_string(b) + "/", cfg, rng, trainable);
}

/// One post-norm attention block: multi-head attention with a key padding
/// mask, residual + layer norm, position-wise feed-forward, residual + norm.
/// Queries may come from a different sequence than keys/values (`x_q` vs
/// `x_kv`); the residual path follows the query side, so the output has one
/// row per query row. `kv_valid` masks key/value columns (row count of x_kv).
/// When `attention_out` is given, each head's probability matrix is appended.
inline Var attention_block(Tape& tape, ParamStore& store, const std::string& prefix,
                           const EncoderConfig& cfg, Var x_q, Var x_kv,
                           const std::vector<std::uint8_t>& kv_valid,
                           std::vector<Tensor>* attention_out = nullptr) {
    const std::size_t dk = cfg.head_dim();
    Var q = tape.add_bias(tape.matmul(x_q, tape.param(store, prefix + "Wq")),
                          tape.param(store, prefix + "bq"));
    Var k = tape.matmul(x_kv, tape.param(store, prefix + "Wk"));
    Var v = tape.add_bias(tape.matmul(x_kv, tape.param(store, prefix + "Wv")),
                          tape.param(store, prefix + "bv"));
    const Real inv_sqrt_dk = static_cast<Real>(1.0 / std::sqrt(static_cast<double>(dk)));
    Var heads;
    for (std::size_t h = 0; h < cfg.n_heads; ++h) {
        Var qh = tape.slice_cols(q, h * dk, dk);
        Var kh = tape.slice_cols(k, h * dk, dk);
        Var vh = tape.slice_cols(v, h * dk, dk);
        Var scores = tape.scale(tape.matmul_nt(qh, kh), inv_sqrt_dk);
        Var probs = tape.softmax_rows(scores, &kv_valid);
        if (attention_out) attention_out->push_back(probs.value());
        Var ctx = tape.matmul(probs, vh);
        heads = (h == 0) ? ctx : tape.concat_cols(heads, ctx);
    }
    Var attended = tape.add_bias(tape.matmul(heads, tape.param(store, prefix + "Wo")),
                                 tape.param(store, prefix + "bo"));
    Var normed1 = tape.layer_norm(tape.add(x_q, attended), tape.param(store, prefix + "ln1_g"),
                                  tape.param(store, prefix + "ln1_b"));
    Var ff = tape.add_bias(
        tape.matmul(tape.relu(tape.add_bias(tape.matmul(normed1, tape.param(store, prefix + "ff/W1")),
                                            tape.param(store, prefix + "ff/b1"))),
                    tape.param(store, prefix + "ff/W2")),
        tape.param(store, prefix + "ff/b2"));
    return tape.layer_norm(tape.add(normed1, ff), tape.param(store, prefix + "ln2_g"),
                           tape.param(store, prefix + "ln2_b"));
}

inline Var transformer_block(Tape& tape, ParamStore& store, const std::string& prefix,
                             const EncoderConfig& cfg, Var x, const std::vector<std::uint8_t>& valid,
                             std::vector<Tensor>* attention_out = nullptr) {
    return attention_block(tape, store, prefix, cfg, x, x, valid, attention_out);
}

struct EncodeResult {
    Var hidden; // (max_len, d_model)
    Var pooled; // (1, d_model), the [CLS] row
};

/// Token + learned positional + segment embeddings, then the block stack.
/// There are no stochastic layers, so training and evaluation passes are
/// identical; gradients flow only where the store marks entries trainable.
inline EncodeResult encode(Tape& tape, ParamStore& store, const std::string& prefix,
                           const EncoderConfig& cfg, const TokenSequence& seq,
                           std::vector<Tensor>* attention_out = nullptr) {
    if (seq.ids.size() != cfg.max_len)
        fail("textenc", "sequence length does not match the encoder's positional table");
    std::vector<std::size_t> positions(cfg.max_len), segments(cfg.max_len);
    for (std::size_t i = 0; i < cfg.max_len; ++i) {
        positions[i] = i;
        segments[i] = seq.segment[i];
    }
    Var x = tape.add(tape.add(tape.gather_rows(tape.param(store, prefix + "emb/token"), seq.ids),
                              tape.gather_rows(tape.param(store, prefix + "emb/pos"), positions)),
                     tape.gather_rows(tape.param(store, prefix + "emb/seg"), segments));
    for (std::size_t b = 0; b < cfg.n_blocks; ++b)
        x = transformer_block(tape, store, prefix + "block" + std::to_string(b) + "/", cfg, x,
                              seq.attention, attention_out);
    return EncodeResult{x, tape.slice_rows(x, seq.cls_index, 1)};
}

// ---------------------------------------------------------------------------
// Sentiment lexicon and masking
// ---------------------------------------------------------------------------

enum class Polarity { positive, negative };

class SentimentLexicon {
public:
    void add(std::string_view word, Polarity polarity) { map_[to_lower(word)] = polarity; }

    std::optional<Polarity> lookup(std::string_view word) const {
        auto it = map_.find(to_lower(word));
        if (it == map_.end()) return std::nullopt;
        return it->second;
    }

    std::size_t size() const { return map_.size(); }

    /// Sorted word lists, handy for generators and reports.
    std::vector<std::string> words(Polarity polarity) const {
        std::vector<std::string> out;
        for (const auto& [w, p] : map_)
            if (p == polarity) out.push_back(w);
        std::sort(out.begin(), out.end());
        return out;
    }

    /// TSV rows `word<TAB>pos|neg`.
    static SentimentLexicon parse(std::istream& in) {
        SentimentLexicon lex;
        std::string line;
        std::size_t line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            if (!line.empty() && line.back() == '\r') line.pop_back();
            if (line.empty() || line[0] == '#') continue;
            const auto parts = split(line, '\t');
            if (parts.size() != 2 || parts[0].empty())
                fail("textenc", "bad lexicon row at line " + std::to_string(line_no));
            const std::string tag = to_lower(parts[1]);
            if (tag == "pos" || tag == "positive")
                lex.add(parts[0], Polarity::positive);
            else if (tag == "neg" || tag == "negative")
                lex.add(parts[0], Polarity::negative);
            else
                fail("textenc", "unknown polarity '" + parts[1] + "' at line " + std::to_string(line_no));
        }
        return lex;
    }

    static SentimentLexicon load_file(const std::string& path) {
        std::istringstream in(read_text_file(path, "textenc"));
        return parse(in);
    }

private:
    std::unordered_map<std::string, Polarity> map_;
};

struct MaskRecord {
    std::size_t position;
    std::size_t original_id;
    std::optional<Polarity> polarity;
};

struct MaskedSequence {
    TokenSequence corrupted;
    std::vector<MaskRecord> records;
};

/// Masks lexicon tokens with probability p_sent and all other real tokens
/// with p_gen; reserved tokens (and padding) are never touched. Masked
/// positions always become [MASK].
inline MaskedSequence mask_tokens(const TokenSequence& seq, const Vocabulary& vocab,
                                  const SentimentLexicon& lexicon, double p_sent, double p_gen,
                                  RngStream& rng) {
    if (!(p_sent > p_gen) || p_sent < 0.0 || p_sent > 1.0 || p_gen < 0.0)
        fail("textenc", "masking rates must satisfy 0 <= p_gen < p_sent <= 1");
    MaskedSequence out;
    out.corrupted = seq;
    for (std::size_t i = 0; i < seq.length; ++i) {
        const std::size_t id = seq.ids[i];
        if (Vocabulary::is_special(id)) continue;
        const auto polarity = lexicon.lookup(vocab.token(id));
        const double p = polarity ? p_sent : p_gen;
        if (rng.bernoulli(p)) {
            out.corrupted.ids[i] = Vocabulary::kMask;
            out.records.push_back(MaskRecord{i, id, polarity});
        }
    }
    return out;
}

inline std::vector<MaskedSequence> sentiment_mask(const std::vector<TokenSequence>& batch,
                                                  const Vocabulary& vocab,
                                                  const SentimentLexicon& lexicon, double p_sent,
                                                  double p_gen, RngStream& rng) {
    std::vector<MaskedSequence> out;
    out.reserve(batch.size());
    for (const auto& seq : batch) out.push_back(mask_tokens(seq, vocab, lexicon, p_sent, p_gen, rng));
    return out;
}

// ---------------------------------------------------------------------------
// Sentiment pretraining (masked-token + polarity + rating objectives)
// ---------------------------------------------------------------------------

struct RatedDocument {
    std::string text;
    int rating = 0; // 1..rating_classes
};

struct SentimentPretrainConfig {
    EncoderConfig encoder;
    double p_sent = 0.5;
    double p_gen = 0.1;
    std::size_t rating_classes = 5;
    std::size_t epochs = 30;
    double lr = 1e-3;
    // Masks are drawn from a stream keyed by (epoch, corpus index), so one
    // example's mask never depends on another example's token count. Turning
    // this off draws masks sequentially from one per-epoch stream instead.
    bool per_example_mask_seed = true;
};

struct SentimentEpochStats {
    std::size_t epoch = 0;
    double total = 0, masked_token = 0, polarity = 0, rating = 0;
};

namespace detail {

struct SentimentBatchLoss {
    Var loss;      // scalar: sum of the three per-mean components
    double mlm_weight = 0, pol_weight = 0, rate_weight = 0;
};

/// Builds the joint objective for a set of masked examples on one tape.
inline Var sentiment_loss(Tape& tape, ParamStore& store, const SentimentPretrainConfig& cfg,
                          const std::vector<MaskedSequence>& masked, const std::vector<int>& ratings,
                          SentimentEpochStats* stats = nullptr) {
    std::vector<Var> mlm_rows_v, pol_rows_v, cls_rows_v;
    std::vector<std::size_t> mlm_gold, pol_gold, rate_gold;
    for (std::size_t e = 0; e < masked.size(); ++e) {
        EncodeResult enc = encode(tape, store, "sent/", cfg.encoder, masked[e].corrupted);
        cls_rows_v.push_back(enc.pooled);
        rate_gold.push_back(static_cast<std::size_t>(ratings[e] - 1));
        for (const MaskRecord& rec : masked[e].records) {
            Var row = tape.slice_rows(enc.hidden, rec.position, 1);
            mlm_rows_v.push_back(row);
            mlm_gold.push_back(rec.original_id);
            if (rec.polarity) {
                pol_rows_v.push_back(row);
                pol_gold.push_back(*rec.polarity == Polarity::positive ? 0 : 1);
            }
        }
    }
    auto stack = [&](std::vector<Var>& rows) {
        Var out = rows[0];
        for (std::size_t i = 1; i < rows.size(); ++i) out = tape.concat_rows(out, rows[i]);
        return out;
    };
    auto head_nll = [&](Var rows, const char* w, const char* b, std::vector<std::size_t>& gold) {
        Var logits = tape.add_bias(tape.matmul(rows, tape.param(store, std::string("sent/") + w)),
                                   tape.param(store, std::string("sent/") + b));
        return tape.nll_mean(tape.softmax_rows(logits), gold);
    };

    Var loss = tape.constant(Tensor::scalar(0));
    double mlm_val = 0, pol_val = 0;
    if (!mlm_rows_v.empty()) {
        Var l = head_nll(stack(mlm_rows_v), "mlm/W", "mlm/b", mlm_gold);
        mlm_val = l.value()[0];
        loss = tape.add(loss, l);
    }
    if (!pol_rows_v.empty()) {
        Var l = head_nll(stack(pol_rows_v), "pol/W", "pol/b", pol_gold);
        pol_val = l.value()[0];
        loss = tape.add(loss, l);
    }
    Var lr_ = head_nll(stack(cls_rows_v), "rate/W", "rate/b", rate_gold);
    const double rate_val = lr_.value()[0];
    loss = tape.add(loss, lr_);
    if (stats) {
        stats->masked_token = mlm_val;
        stats->polarity = pol_val;
        stats->rating = rate_val;
        stats->total = loss.value()[0];
    }
    return loss;
}

} // namespace detail

/// Pretrains the sentiment encoder on (text, rating) pairs and returns the
/// parameter store with every entry frozen. The store also carries the three
/// pretraining heads (mlm/pol/rate) for inspection; downstream fusion uses
/// only the encoder entries.
inline ParamStore pretrain_sentiment(const std::vector<RatedDocument>& corpus,
                                     const Vocabulary& vocab, const SentimentLexicon& lexicon,
                                     const SentimentPretrainConfig& cfg, RngStream& rng,
                                     std::vector<SentimentEpochStats>* history = nullptr) {
    if (corpus.empty()) fail("textenc", "sentiment corpus is empty");
    for (const auto& doc : corpus)
        if (doc.rating < 1 || static_cast<std::size_t>(doc.rating) > cfg.rating_classes)
            fail("textenc", "rating " + std::to_string(doc.rating) + " outside 1.." +
                                std::to_string(cfg.rating_classes));

    EncoderConfig enc_cfg = cfg.encoder;
    enc_cfg.vocab_size = vocab.size();

    ParamStore store;
    RngStream init_rng = rng.derive("init");
    init_encoder_params(store, "sent/", enc_cfg, init_rng);
    store.add("sent/mlm/W", glorot_uniform(enc_cfg.d_model, vocab.size(),
                                           {enc_cfg.d_model, vocab.size()}, init_rng));
    store.add("sent/mlm/b", Tensor({vocab.size()}));
    store.add("sent/pol/W", glorot_uniform(enc_cfg.d_model, 2, {enc_cfg.d_model, 2}, init_rng));
    store.add("sent/pol/b", Tensor({2}));
    store.add("sent/rate/W", glorot_uniform(enc_cfg.d_model, cfg.rating_classes,
                                            {enc_cfg.d_model, cfg.rating_classes}, init_rng));
    store.add("sent/rate/b", Tensor({cfg.rating_classes}));

    std::vector<TokenSequence> sequences;
    std::vector<int> ratings;
    sequences.reserve(corpus.size());
    for (const auto& doc : corpus) {
        sequences.push_back(tokenize(doc.text, "", vocab, enc_cfg.max_len));
        ratings.push_back(doc.rating);
    }

    Adam opt(AdamConfig{cfg.lr, 0.9, 0.999, 1e-8});
    RngStream mask_root = rng.derive("mask");
    SentimentPretrainConfig local = cfg;
    local.encoder = enc_cfg;
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::vector<MaskedSequence> masked;
        masked.reserve(sequences.size());
        RngStream epoch_stream = mask_root.derive(epoch);
        for (std::size_t i = 0; i < sequences.size(); ++i) {
            if (cfg.per_example_mask_seed) {
                RngStream ex = epoch_stream.derive(i);
                masked.push_back(mask_tokens(sequences[i], vocab, lexicon, cfg.p_sent, cfg.p_gen, ex));
            } else {
                masked.push_back(
                    mask_tokens(sequences[i], vocab, lexicon, cfg.p_sent, cfg.p_gen, epoch_stream));
            }
        }
        Tape tape;
        SentimentEpochStats stats;
        stats.epoch = epoch;
        Var loss = detail::sentiment_loss(tape, store, local, masked, ratings, &stats);
        store.zero_grads();
        tape.backward(loss);
        store.fill_missing_grads();
        opt.step(store);
        if (history) history->push_back(stats);
    }
    store.freeze_all();
    return store;
}

/// K-class rating distribution for one document under a pretrained store.
inline Tensor predict_rating(ParamStore& store, const EncoderConfig& cfg, const Vocabulary& vocab,
                             std::string_view document) {
    Tape tape;
    TokenSequence seq = tokenize(document, "", vocab, cfg.max_len);
    EncodeResult enc = encode(tape, store, "sent/", cfg, seq);
    Var logits = tape.add_bias(tape.matmul(enc.pooled, tape.param(store, "sent/rate/W")),
                               tape.param(store, "sent/rate/b"));
    return tape.softmax_rows(logits).value();
}

} // namespace stancekit::text
