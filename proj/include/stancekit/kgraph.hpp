#pragma once

#include <algorithm>
#include <cstdint>
#include <istream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "stancekit/error.hpp"
#include "stancekit/text_util.hpp"

namespace stancekit::kg {

using NodeId = std::uint32_t;
using RelId = std::uint32_t;

struct Triple {
    NodeId head;
    RelId rel;
    NodeId tail;

    auto operator<=>(const Triple&) const = default;
};

/// Immutable directed labeled multigraph over interned concepts/relations.
/// Triples are deduplicated; adjacency is indexed per node and direction with
/// the relation id carried on each arc.
class KnowledgeGraph {
public:
    struct Arc {
        RelId rel;
        NodeId other;
        auto operator<=>(const Arc&) const = default;
    };

    class Builder {
    public:
        NodeId intern_concept(std::string_view normalized_surface) {
            auto it = concept_ids_.find(std::string(normalized_surface));
            if (it != concept_ids_.end()) return it->second;
            const NodeId id = static_cast<NodeId>(concepts_.size());
            concepts_.emplace_back(normalized_surface);
            concept_ids_.emplace(concepts_.back(), id);
            return id;
        }

        RelId intern_relation(std::string_view name) {
            auto it = relation_ids_.find(std::string(name));
            if (it != relation_ids_.end()) return it->second;
            const RelId id = static_cast<RelId>(relations_.size());
            relations_.emplace_back(name);
            relation_ids_.emplace(relations_.back(), id);
            return id;
        }

        /// Returns false when the triple was already present.
        bool add_triple(NodeId head, RelId rel, NodeId tail) {
            if (head >= concepts_.size() || tail >= concepts_.size() || rel >= relations_.size())
                fail("kgraph", "triple references an uninterned id");
            return seen_.insert(Triple{head, rel, tail}).second;
        }

        bool add_triple_surfaces(std::string_view head, std::string_view rel, std::string_view tail) {
            const NodeId h = intern_concept(normalize_concept(head));
            const RelId r = intern_relation(std::string(rel));
            const NodeId t = intern_concept(normalize_concept(tail));
            return add_triple(h, r, t);
        }

        std::size_t concept_count() const { return concepts_.size(); }
        std::size_t triple_count() const { return seen_.size(); }

        KnowledgeGraph build() {
            KnowledgeGraph g;
            g.concepts_ = std::move(concepts_);
            g.relations_ = std::move(relations_);
            g.concept_ids_ = std::move(concept_ids_);
            g.relation_ids_ = std::move(relation_ids_);
            g.triples_.assign(seen_.begin(), seen_.end()); // set order: deterministic
            g.rebuild_adjacency();
            return g;
        }

    private:
        std::vector<std::string> concepts_;
        std::vector<std::string> relations_;
        std::unordered_map<std::string, NodeId> concept_ids_;
        std::unordered_map<std::string, RelId> relation_ids_;
        std::set<Triple> seen_;
    };

    std::size_t concept_count() const { return concepts_.size(); }
    std::size_t relation_count() const { return relations_.size(); }
    std::size_t triple_count() const { return triples_.size(); }

    const std::vector<std::string>& concepts() const { return concepts_; }
    const std::vector<std::string>& relations() const { return relations_; }
    const std::vector<Triple>& triples() const { return triples_; }

    const std::string& concept_surface(NodeId id) const { return concepts_.at(id); }
    const std::string& relation_name(RelId id) const { return relations_.at(id); }

    std::optional<NodeId> find_concept(std::string_view normalized) const {
        auto it = concept_ids_.find(std::string(normalized));
        if (it == concept_ids_.end()) return std::nullopt;
        return it->second;
    }

    std::optional<RelId> find_relation(std::string_view name) const {
        auto it = relation_ids_.find(std::string(name));
        if (it == relation_ids_.end()) return std::nullopt;
        return it->second;
    }

    /// Arcs leaving `node` (node is head), sorted by (rel, other).
    const std::vector<Arc>& out_arcs(NodeId node) const { return out_.at(node); }
    /// Arcs entering `node` (node is tail), sorted by (rel, other).
    const std::vector<Arc>& in_arcs(NodeId node) const { return in_.at(node); }

    /// Reconstructs the adjacency index from the triple list (used to verify
    /// the stored index, and internally after construction).
    std::pair<std::vector<std::vector<Arc>>, std::vector<std::vector<Arc>>> adjacency_from_triples() const {
        std::vector<std::vector<Arc>> out(concepts_.size()), in(concepts_.size());
        for (const Triple& t : triples_) {
            out[t.head].push_back(Arc{t.rel, t.tail});
            in[t.tail].push_back(Arc{t.rel, t.head});
        }
        for (auto& v : out) std::sort(v.begin(), v.end());
        for (auto& v : in) std::sort(v.begin(), v.end());
        return {std::move(out), std::move(in)};
    }

    bool adjacency_consistent() const {
        auto rebuilt = adjacency_from_triples();
        return rebuilt.first == out_ && rebuilt.second == in_;
    }

    // -- serialization: header line, then the three tables as TSV ------------

    void save(std::ostream& out) const {
        out << "#concepts " << concepts_.size() << " #relations " << relations_.size()
            << " #triples " << triples_.size() << "\n";
        for (std::size_t i = 0; i < concepts_.size(); ++i) out << i << '\t' << concepts_[i] << '\n';
        for (std::size_t i = 0; i < relations_.size(); ++i) out << i << '\t' << relations_[i] << '\n';
        for (const Triple& t : triples_) out << t.head << '\t' << t.rel << '\t' << t.tail << '\n';
    }

    void save_file(const std::string& path) const {
        std::ostringstream ss;
        save(ss);
        write_text_file(path, ss.str(), "kgraph");
    }

    /// Re-ingestable triple dump: head<TAB>relation<TAB>tail surface rows.
    void save_simple_tsv(std::ostream& out) const {
        for (const Triple& t : triples_)
            out << concepts_[t.head] << '\t' << relations_[t.rel] << '\t' << concepts_[t.tail] << '\n';
    }

    static KnowledgeGraph load(std::istream& in) {
        std::string line;
        if (!std::getline(in, line)) fail("kgraph", "empty graph file");
        std::size_t n = 0, m = 0, k = 0;
        {
            std::istringstream hs(line);
            std::string tag;
            if (!(hs >> tag >> n) || tag != "#concepts") fail("kgraph", "bad graph header: " + line);
            if (!(hs >> tag >> m) || tag != "#relations") fail("kgraph", "bad graph header: " + line);
            if (!(hs >> tag >> k) || tag != "#triples") fail("kgraph", "bad graph header: " + line);
        }
        KnowledgeGraph g;
        g.concepts_.reserve(n);
        g.relations_.reserve(m);
        g.triples_.reserve(k);
        auto need_line = [&](const char* what) {
            if (!std::getline(in, line)) fail("kgraph", std::string("graph file truncated in ") + what);
        };
        for (std::size_t i = 0; i < n; ++i) {
            need_line("concept table");
            const auto parts = split(line, '\t');
            if (parts.size() != 2 || static_cast<std::size_t>(parse_int(parts[0], "kgraph")) != i)
                fail("kgraph", "bad concept row: " + line);
            g.concepts_.push_back(parts[1]);
            g.concept_ids_.emplace(parts[1], static_cast<NodeId>(i));
        }
        if (g.concept_ids_.size() != n) fail("kgraph", "duplicate concept surfaces in graph file");
        for (std::size_t i = 0; i < m; ++i) {
            need_line("relation table");
            const auto parts = split(line, '\t');
            if (parts.size() != 2 || static_cast<std::size_t>(parse_int(parts[0], "kgraph")) != i)
                fail("kgraph", "bad relation row: " + line);
            g.relations_.push_back(parts[1]);
            g.relation_ids_.emplace(parts[1], static_cast<RelId>(i));
        }
        if (g.relation_ids_.size() != m) fail("kgraph", "duplicate relation names in graph file");
        for (std::size_t i = 0; i < k; ++i) {
            need_line("triple table");
            const auto parts = split(line, '\t');
            if (parts.size() != 3) fail("kgraph", "bad triple row: " + line);
            Triple t{static_cast<NodeId>(parse_int(parts[0], "kgraph")),
                     static_cast<RelId>(parse_int(parts[1], "kgraph")),
                     static_cast<NodeId>(parse_int(parts[2], "kgraph"))};
            if (t.head >= n || t.tail >= n || t.rel >= m) fail("kgraph", "triple id out of range: " + line);
            g.triples_.push_back(t);
        }
        std::set<Triple> dedup(g.triples_.begin(), g.triples_.end());
        if (dedup.size() != g.triples_.size()) fail("kgraph", "duplicate triples in graph file");
        g.rebuild_adjacency();
        return g;
    }

    static KnowledgeGraph load_file(const std::string& path) {
        std::istringstream in(read_text_file(path, "kgraph"));
        return load(in);
    }

private:
    friend class Builder;

    void rebuild_adjacency() {
        auto rebuilt = adjacency_from_triples();
        out_ = std::move(rebuilt.first);
        in_ = std::move(rebuilt.second);
    }

    std::vector<std::string> concepts_;
    std::vector<std::string> relations_;
    std::unordered_map<std::string, NodeId> concept_ids_;
    std::unordered_map<std::string, RelId> relation_ids_;
    std::vector<Triple> triples_;
    std::vector<std::vector<Arc>> out_;
    std::vector<std::vector<Arc>> in_;
};

// ---------------------------------------------------------------------------
// Ingestion
// ---------------------------------------------------------------------------

struct IngestOptions {
    enum class Format { auto_detect, simple_tsv, conceptnet_csv };
    Format format = Format::auto_detect;
    std::string language = "en";               // ConceptNet: keep only /c/<language>/ terms
    std::vector<std::string> relation_whitelist; // empty = accept all relations
    bool strict = false;                        // abort on the first malformed row
};

struct IngestReport {
    std::size_t rows_read = 0;
    std::size_t rows_kept = 0;          // rows that contributed a (possibly duplicate) triple
    std::size_t rows_malformed = 0;
    std::size_t rows_filtered = 0;      // language / relation-whitelist rejections
    std::size_t duplicate_triples = 0;
    std::vector<std::string> rejects;   // "line N: reason" (capped)

    static constexpr std::size_t kMaxRejectRecords = 100;

    void reject(std::size_t line, const std::string& reason, bool strict) {
        ++rows_malformed;
        if (strict) fail("kgraph", "line " + std::to_string(line) + ": " + reason);
        if (rejects.size() < kMaxRejectRecords)
            rejects.push_back("line " + std::to_string(line) + ": " + reason);
    }
};

namespace detail {

/// "/c/en/climate_change/n/..." -> language "en", term "climate_change".
inline bool parse_concept_uri(std::string_view uri, std::string& lang, std::string& term) {
    if (uri.substr(0, 3) != "/c/") return false;
    const auto rest = uri.substr(3);
    const auto slash = rest.find('/');
    if (slash == std::string_view::npos || slash == 0) return false;
    lang.assign(rest.substr(0, slash));
    auto t = rest.substr(slash + 1);
    const auto next = t.find('/');
    if (next != std::string_view::npos) t = t.substr(0, next);
    if (t.empty()) return false;
    term = to_lower(t);
    return true;
}

inline bool parse_relation_uri(std::string_view uri, std::string& name) {
    if (uri.substr(0, 3) != "/r/") return false;
    auto rest = uri.substr(3);
    if (rest.empty()) return false;
    name.assign(rest);
    return true;
}

} // namespace detail

/// Reads a triple dump into a graph. Two formats:
///   simple_tsv      head<TAB>relation<TAB>tail (surface text)
///   conceptnet_csv  assertion rows: uri, /r/Rel, /c/lang/term, /c/lang/term, json
/// auto_detect picks conceptnet_csv when the first data row's second column
/// starts with "/r/".
inline std::pair<KnowledgeGraph, IngestReport> ingest_triples(std::istream& in,
                                                              const IngestOptions& options = {}) {
    KnowledgeGraph::Builder builder;
    IngestReport report;
    const std::unordered_set<std::string> whitelist(options.relation_whitelist.begin(),
                                                    options.relation_whitelist.end());
    auto relation_allowed = [&](const std::string& name) {
        return whitelist.empty() || whitelist.count(name) != 0;
    };

    IngestOptions::Format format = options.format;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        ++report.rows_read;
        const auto cols = split(line, '\t');
        if (format == IngestOptions::Format::auto_detect) {
            format = (cols.size() >= 2 && cols[1].rfind("/r/", 0) == 0)
                         ? IngestOptions::Format::conceptnet_csv
                         : IngestOptions::Format::simple_tsv;
        }
        if (format == IngestOptions::Format::simple_tsv) {
            if (cols.size() != 3 || cols[0].empty() || cols[1].empty() || cols[2].empty()) {
                report.reject(line_no, "expected head<TAB>relation<TAB>tail", options.strict);
                continue;
            }
            const std::string rel = trim(cols[1]);
            if (!relation_allowed(rel)) {
                ++report.rows_filtered;
                continue;
            }
            ++report.rows_kept;
            if (!builder.add_triple_surfaces(cols[0], rel, cols[2])) ++report.duplicate_triples;
        } else {
            if (cols.size() < 4) {
                report.reject(line_no, "expected at least 4 tab-separated assertion columns",
                              options.strict);
                continue;
            }
            std::string rel, hl, head, tl, tail;
            if (!detail::parse_relation_uri(cols[1], rel)) {
                report.reject(line_no, "bad relation uri '" + cols[1] + "'", options.strict);
                continue;
            }
            if (!detail::parse_concept_uri(cols[2], hl, head) ||
                !detail::parse_concept_uri(cols[3], tl, tail)) {
                report.reject(line_no, "bad concept uri", options.strict);
                continue;
            }
            if ((!options.language.empty() && (hl != options.language || tl != options.language)) ||
                !relation_allowed(rel)) {
                ++report.rows_filtered;
                continue;
            }
            ++report.rows_kept;
            if (!builder.add_triple_surfaces(head, rel, tail)) ++report.duplicate_triples;
        }
    }
    if (builder.triple_count() == 0) fail("kgraph", "ingestion produced an empty graph");
    return {builder.build(), report};
}

inline std::pair<KnowledgeGraph, IngestReport> ingest_triples_file(const std::string& path,
                                                                   const IngestOptions& options = {}) {
    std::istringstream in(read_text_file(path, "kgraph"));
    return ingest_triples(in, options);
}

// ---------------------------------------------------------------------------
// Seed-term extraction
// ---------------------------------------------------------------------------

enum class PartOfSpeech { noun, adjective, adverb, verb, other };

/// Word -> part-of-speech oracle backed by a TSV lexicon. Unlisted words have
/// no part of speech and never become seed terms.
class PosLexicon {
public:
    void add(std::string_view word, PartOfSpeech pos) { map_[to_lower(word)] = pos; }

    std::optional<PartOfSpeech> lookup(std::string_view word) const {
        auto it = map_.find(to_lower(word));
        if (it == map_.end()) return std::nullopt;
        return it->second;
    }

    std::size_t size() const { return map_.size(); }

    static PartOfSpeech parse_pos(std::string_view tag) {
        const std::string t = to_lower(tag);
        if (t == "noun" || t == "n") return PartOfSpeech::noun;
        if (t == "adj" || t == "adjective" || t == "a") return PartOfSpeech::adjective;
        if (t == "adv" || t == "adverb" || t == "r") return PartOfSpeech::adverb;
        if (t == "verb" || t == "v") return PartOfSpeech::verb;
        return PartOfSpeech::other;
    }

    /// TSV rows `word<TAB>POS`. Later rows win on duplicates.
    static PosLexicon parse(std::istream& in) {
        PosLexicon lex;
        std::string line;
        std::size_t line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            if (!line.empty() && line.back() == '\r') line.pop_back();
            if (line.empty() || line[0] == '#') continue;
            const auto parts = split(line, '\t');
            if (parts.size() != 2 || parts[0].empty())
                fail("kgraph", "bad POS lexicon row at line " + std::to_string(line_no));
            lex.add(parts[0], parse_pos(parts[1]));
        }
        return lex;
    }

    static PosLexicon load_file(const std::string& path) {
        std::istringstream in(read_text_file(path, "kgraph"));
        return parse(in);
    }

private:
    std::unordered_map<std::string, PartOfSpeech> map_;
};

/// Unique normalized nouns/adjectives/adverbs across all documents, sorted.
inline std::vector<std::string> extract_seed_terms(const std::vector<std::string>& documents,
                                                   const PosLexicon& pos_oracle) {
    std::set<std::string> seeds;
    for (const std::string& doc : documents) {
        for (const std::string& token : word_tokenize(doc)) {
            const auto pos = pos_oracle.lookup(token);
            if (!pos) continue;
            if (*pos == PartOfSpeech::noun || *pos == PartOfSpeech::adjective ||
                *pos == PartOfSpeech::adverb)
                seeds.insert(normalize_concept(token));
        }
    }
    return std::vector<std::string>(seeds.begin(), seeds.end());
}

// ---------------------------------------------------------------------------
// Subgraph extraction
// ---------------------------------------------------------------------------

enum class SubgraphMode {
    incident, // triples with an endpoint in the seed set
    vicinity  // triples with an endpoint in seeds or their radius-1 neighborhood
};

struct SubgraphResult {
    KnowledgeGraph graph;                         // densely re-indexed concepts
    std::vector<NodeId> new_to_old;               // new id -> original id
    std::unordered_map<NodeId, NodeId> old_to_new;
    std::size_t seeds_resolved = 0;
    std::size_t seeds_dropped = 0;                // seed surfaces absent from the graph
};

inline SubgraphResult extract_subgraph(const KnowledgeGraph& graph,
                                       const std::vector<std::string>& seed_surfaces,
                                       SubgraphMode mode) {
    std::vector<NodeId> seeds;
    SubgraphResult result;
    for (const std::string& s : seed_surfaces) {
        if (auto id = graph.find_concept(normalize_concept(s))) {
            seeds.push_back(*id);
            ++result.seeds_resolved;
        } else {
            ++result.seeds_dropped;
        }
    }
    std::sort(seeds.begin(), seeds.end());
    seeds.erase(std::unique(seeds.begin(), seeds.end()), seeds.end());

    std::unordered_set<NodeId> allowed(seeds.begin(), seeds.end());
    if (mode == SubgraphMode::vicinity) {
        for (NodeId s : seeds) {
            for (const auto& arc : graph.out_arcs(s)) allowed.insert(arc.other);
            for (const auto& arc : graph.in_arcs(s)) allowed.insert(arc.other);
        }
    }

    // Keep triples touching the allowed set; collect endpoints in old-id order.
    std::vector<Triple> kept;
    std::set<NodeId> endpoints;
    for (const Triple& t : graph.triples()) {
        if (allowed.count(t.head) || allowed.count(t.tail)) {
            kept.push_back(t);
            endpoints.insert(t.head);
            endpoints.insert(t.tail);
        }
    }

    KnowledgeGraph::Builder builder;
    for (NodeId old_id : endpoints) {
        const NodeId new_id = builder.intern_concept(graph.concept_surface(old_id));
        result.new_to_old.push_back(old_id);
        result.old_to_new.emplace(old_id, new_id);
    }
    // The relation table is carried over wholesale so relation ids stay stable.
    for (const std::string& rel : graph.relations()) builder.intern_relation(rel);
    for (const Triple& t : kept)
        builder.add_triple(result.old_to_new.at(t.head), t.rel, result.old_to_new.at(t.tail));
    result.graph = builder.build();
    return result;
}

/// Convenience overload for already-resolved seed ids.
inline SubgraphResult extract_subgraph(const KnowledgeGraph& graph, const std::vector<NodeId>& seeds,
                                       SubgraphMode mode) {
    std::vector<std::string> surfaces;
    surfaces.reserve(seeds.size());
    for (NodeId s : seeds) surfaces.push_back(graph.concept_surface(s));
    return extract_subgraph(graph, surfaces, mode);
}

} // namespace stancekit::kg
