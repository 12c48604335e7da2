#pragma once

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "lexdial/digest.hpp"
#include "lexdial/error.hpp"
#include "lexdial/text.hpp"

namespace lexdial {

using token_seq = std::vector<std::string>;

/// One competing form of a concept. surface_forms[0] is the canonical form.
struct variant {
    std::string id;
    std::vector<token_seq> surface_forms;
};

struct concept_entry {
    std::string id;
    std::string gloss;
    std::vector<variant> variants;
};

struct lexicon {
    std::vector<concept_entry> concepts;
    normalization_config normalization;

    /// Number of `variant` lines read, before duplicates were merged.
    std::size_t raw_feature_count = 0;
    std::vector<std::string> warnings;

    std::size_t feature_count() const {
        std::size_t n = 0;
        for (const auto& c : concepts) n += c.variants.size();
        return n;
    }

    const concept_entry* find_concept(std::string_view id) const {
        for (const auto& c : concepts)
            if (c.id == id) return &c;
        return nullptr;
    }

    bool has_feature(std::string_view concept_id, std::string_view variant_id) const {
        const concept_entry* c = find_concept(concept_id);
        if (!c) return false;
        return std::any_of(c->variants.begin(), c->variants.end(),
                           [&](const variant& v) { return v.id == variant_id; });
    }

    /// Content hash over normalized concepts, variants and surface forms.
    /// Two lexicons with equal fingerprints match identically.
    std::string fingerprint() const {
        sha256 h;
        h.update(normalization.fold_diacritics ? "fold\n" : "nofold\n");
        for (const auto& c : concepts) {
            h.update("C\t").update(c.id).update("\n");
            for (const auto& v : c.variants) {
                h.update("V\t").update(v.id).update("\n");
                for (const auto& f : v.surface_forms) h.update("F\t").update(join_tokens(f, " ")).update("\n");
            }
        }
        return h.hex();
    }
};

struct lexicon_options {
    normalization_config normalization;
    /// Keep the first owner of a surface form shared across concepts or
    /// variants instead of failing the load.
    bool allow_collisions = false;
};

namespace detail {

inline std::vector<std::string_view> split(std::string_view s, char sep) {
    std::vector<std::string_view> parts;
    std::size_t start = 0;
    while (true) {
        std::size_t pos = s.find(sep, start);
        if (pos == std::string_view::npos) {
            parts.push_back(s.substr(start));
            return parts;
        }
        parts.push_back(s.substr(start, pos - start));
        start = pos + 1;
    }
}

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

inline bool valid_concept_id(std::string_view id) {
    if (id.size() < 2 || !std::isalpha(static_cast<unsigned char>(id[0]))) return false;
    return std::all_of(id.begin() + 1, id.end(),
                       [](char c) { return std::isdigit(static_cast<unsigned char>(c)); });
}

} // namespace detail

/// Parses the line-oriented lexicon format:
///
///     # comment
///     concept<TAB>C182<TAB>Cold
///     variant<TAB>resfrío[<TAB>expansion;expansion...]
///
/// Duplicate variants inside a concept and duplicate forms inside a variant
/// are merged (the former with a warning). A surface form owned by two
/// different (concept, variant) pairs is an error unless allowed.
inline lexicon parse_lexicon(std::istream& in, const std::string& source = "<lexicon>",
                             const lexicon_options& options = {}) {
    lexicon lex;
    lex.normalization = options.normalization;

    struct owner {
        std::size_t concept_index;
        std::size_t variant_index;
    };
    std::map<std::string, owner> owners;
    std::vector<std::string> collisions;

    auto fail = [&](std::size_t line_no, const std::string& msg) -> error {
        return error(source + ":" + std::to_string(line_no) + ": " + msg);
    };

    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::string_view view = line;
        if (line_no == 1 && view.starts_with("\xEF\xBB\xBF")) view.remove_prefix(3);
        if (detail::trim(view).empty() || detail::trim(view).front() == '#') continue;

        auto fields = detail::split(view, '\t');
        std::string_view kind = detail::trim(fields[0]);
        if (kind == "concept") {
            if (fields.size() < 3) throw fail(line_no, "expected concept<TAB>ID<TAB>gloss");
            std::string id(detail::trim(fields[1]));
            if (!detail::valid_concept_id(id))
                throw fail(line_no, "concept id '" + id + "' must be a letter followed by digits");
            if (lex.find_concept(id)) throw fail(line_no, "duplicate concept id '" + id + "'");
            lex.concepts.push_back({id, std::string(detail::trim(fields[2])), {}});
        } else if (kind == "variant") {
            if (lex.concepts.empty()) throw fail(line_no, "variant before any concept");
            if (fields.size() < 2 || fields.size() > 3)
                throw fail(line_no, "expected variant<TAB>form[<TAB>expansions]");
            ++lex.raw_feature_count;

            token_seq canonical = normalize_text(detail::trim(fields[1]), options.normalization);
            if (canonical.empty()) throw fail(line_no, "variant has no tokens");
            std::vector<token_seq> forms{canonical};
            if (fields.size() == 3) {
                for (auto part : detail::split(fields[2], ';')) {
                    if (detail::trim(part).empty()) continue;
                    token_seq f = normalize_text(detail::trim(part), options.normalization);
                    if (f.empty()) throw fail(line_no, "expansion has no tokens");
                    forms.push_back(std::move(f));
                }
            }

            concept_entry& current = lex.concepts.back();
            std::string id = join_tokens(canonical, "-");
            auto it = std::find_if(current.variants.begin(), current.variants.end(),
                                   [&](const variant& v) { return v.id == id; });
            std::size_t vi;
            if (it == current.variants.end()) {
                current.variants.push_back({id, {}});
                vi = current.variants.size() - 1;
            } else {
                vi = static_cast<std::size_t>(it - current.variants.begin());
                lex.warnings.push_back(source + ":" + std::to_string(line_no) + ": duplicate variant '" +
                                       id + "' in " + current.id + " merged");
            }
            variant& v = current.variants[vi];
            std::size_t ci = lex.concepts.size() - 1;

            for (auto& f : forms) {
                if (std::find(v.surface_forms.begin(), v.surface_forms.end(), f) != v.surface_forms.end())
                    continue;
                std::string key = join_tokens(f, " ");
                auto [pos, inserted] = owners.try_emplace(key, owner{ci, vi});
                if (!inserted) {
                    const auto& prev = lex.concepts[pos->second.concept_index];
                    std::string msg = "'" + key + "' claimed by " + prev.id + "/" +
                                      prev.variants[pos->second.variant_index].id + " and " + current.id +
                                      "/" + id + " (line " + std::to_string(line_no) + ")";
                    if (!options.allow_collisions) {
                        collisions.push_back(msg);
                    } else {
                        lex.warnings.push_back("collision kept first owner: " + msg);
                    }
                    continue;
                }
                v.surface_forms.push_back(std::move(f));
            }
        } else {
            throw fail(line_no, "unknown record kind '" + std::string(kind) + "'");
        }
    }

    if (!collisions.empty()) {
        std::string msg = source + ": surface form collision";
        for (const auto& c : collisions) msg += "\n  " + c;
        throw error(msg);
    }
    if (lex.concepts.empty()) throw error(source + ": no concepts");
    for (const auto& c : lex.concepts) {
        if (c.variants.size() < 2)
            throw error(source + ": concept " + c.id + " has " + std::to_string(c.variants.size()) +
                        " variant(s); at least 2 required");
    }
    return lex;
}

inline lexicon load_lexicon(const std::filesystem::path& path, const lexicon_options& options = {}) {
    std::ifstream in(path);
    if (!in) throw error("cannot open lexicon " + path.string());
    return parse_lexicon(in, path.string(), options);
}

/// A lexicon occurrence found in a text. Token offsets are into the
/// normalized token stream, half-open.
struct hit {
    std::uint32_t concept_index;
    std::uint32_t variant_index;
    std::string_view concept_id;
    std::string_view variant_id;
    std::size_t token_begin;
    std::size_t token_end;
};

/// Greedy longest-match phrase matcher over normalized tokens. Immutable
/// once built; safe to share across threads.
class matcher {
public:
    explicit matcher(std::shared_ptr<const lexicon> lex) : lex_(std::move(lex)) {
        if (!lex_) throw error("matcher: null lexicon");
        nodes_.push_back({});
        for (std::uint32_t ci = 0; ci < lex_->concepts.size(); ++ci) {
            const auto& c = lex_->concepts[ci];
            for (std::uint32_t vi = 0; vi < c.variants.size(); ++vi) {
                for (const auto& form : c.variants[vi].surface_forms) insert(form, ci, vi);
            }
        }
    }

    explicit matcher(lexicon lex) : matcher(std::make_shared<const lexicon>(std::move(lex))) {}

    const lexicon& lexicon_ref() const { return *lex_; }
    std::shared_ptr<const lexicon> lexicon_ptr() const { return lex_; }

    /// Matches an already-normalized token stream.
    std::vector<hit> match_tokens(const std::vector<std::string>& tokens) const {
        std::vector<std::int64_t> ids(tokens.size());
        for (std::size_t i = 0; i < tokens.size(); ++i) {
            auto it = vocab_.find(tokens[i]);
            ids[i] = it == vocab_.end() ? -1 : static_cast<std::int64_t>(it->second);
        }

        std::vector<hit> hits;
        std::size_t i = 0;
        while (i < ids.size()) {
            std::uint32_t node = 0;
            std::optional<std::pair<std::size_t, std::uint32_t>> best; // (end, terminal node)
            for (std::size_t j = i; j < ids.size() && ids[j] >= 0; ++j) {
                auto e = edges_.find(edge_key(node, static_cast<std::uint32_t>(ids[j])));
                if (e == edges_.end()) break;
                node = e->second;
                if (nodes_[node].terminal) best = {j + 1, node};
            }
            if (!best) {
                ++i;
                continue;
            }
            const auto& n = nodes_[best->second];
            const auto& c = lex_->concepts[n.concept_index];
            hits.push_back({n.concept_index, n.variant_index, c.id, c.variants[n.variant_index].id, i,
                            best->first});
            i = best->first;
        }
        return hits;
    }

    std::vector<hit> match_text(std::string_view raw) const {
        return match_tokens(normalize_text(raw, lex_->normalization));
    }

private:
    struct node {
        bool terminal = false;
        std::uint32_t concept_index = 0;
        std::uint32_t variant_index = 0;
    };

    static std::uint64_t edge_key(std::uint32_t from, std::uint32_t token) {
        return (static_cast<std::uint64_t>(from) << 32) | token;
    }

    void insert(const token_seq& form, std::uint32_t ci, std::uint32_t vi) {
        std::uint32_t cur = 0;
        for (const auto& tok : form) {
            auto [vit, _] = vocab_.try_emplace(tok, static_cast<std::uint32_t>(vocab_.size()));
            auto [eit, added] = edges_.try_emplace(edge_key(cur, vit->second),
                                                   static_cast<std::uint32_t>(nodes_.size()));
            if (added) nodes_.push_back({});
            cur = eit->second;
        }
        // Collisions were rejected (or resolved to the first owner) at load time.
        if (!nodes_[cur].terminal) nodes_[cur] = {true, ci, vi};
    }

    std::shared_ptr<const lexicon> lex_;
    std::unordered_map<std::string, std::uint32_t> vocab_;
    std::unordered_map<std::uint64_t, std::uint32_t> edges_;
    std::vector<node> nodes_;
};

inline matcher build_matcher(const lexicon& lex) { return matcher(lex); }

inline std::vector<hit> match_text(const matcher& m, std::string_view raw) { return m.match_text(raw); }

} // namespace lexdial
