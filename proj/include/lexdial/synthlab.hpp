#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "lexdial/aggregate.hpp"
#include "lexdial/cluster.hpp"
#include "lexdial/error.hpp"
#include "lexdial/geogrid.hpp"
#include "lexdial/ingest.hpp"
#include "lexdial/lexicon.hpp"

namespace lexdial {

/// concept id -> (variant id -> probability)
using preference_table = std::map<std::string, std::map<std::string, double>>;

struct synth_region {
    std::string name;
    bbox box{};
    double weight = 1.0;
    /// For a sub-region these override the parent's entries per concept.
    preference_table preferences;
    std::vector<synth_region> subregions;
};

struct synth_spec {
    std::vector<synth_region> regions;
    double noise_rate = 0.0;
    std::size_t n_records = 0;
    std::vector<std::string> templates;
    std::uint64_t seed = 1;
    std::string lang = "es";
};

inline const std::vector<std::string>& default_templates() {
    static const std::vector<std::string> t{
        "hoy hablamos de {} con mis amigos",
        "no sé qué pensar sobre {} la verdad",
        "{} otra vez jajaja",
        "me acordé de {} esta mañana",
        "dicen que {} es lo mejor",
    };
    return t;
}

namespace detail {

inline bbox parse_box(const nlohmann::json& j) {
    if (!j.is_array() || j.size() != 4) throw error("synth spec: box must be [lat1, lon1, lat2, lon2]");
    return bbox::from_corners(j[0].get<double>(), j[1].get<double>(), j[2].get<double>(), j[3].get<double>());
}

inline synth_region parse_region(const nlohmann::json& j) {
    synth_region r;
    r.name = j.at("name").get<std::string>();
    r.box = parse_box(j.at("box"));
    r.weight = j.value("weight", 1.0);
    if (j.contains("preferences")) {
        for (const auto& [cid, dist] : j["preferences"].items())
            for (const auto& [vid, p] : dist.items()) r.preferences[cid][vid] = p.get<double>();
    }
    if (j.contains("subregions"))
        for (const auto& s : j["subregions"]) r.subregions.push_back(parse_region(s));
    return r;
}

inline nlohmann::ordered_json region_json(const synth_region& r) {
    nlohmann::ordered_json j;
    j["name"] = r.name;
    j["box"] = {r.box.lat_min, r.box.lon_min, r.box.lat_max, r.box.lon_max};
    j["weight"] = r.weight;
    nlohmann::ordered_json prefs = nlohmann::ordered_json::object();
    for (const auto& [cid, dist] : r.preferences) {
        nlohmann::ordered_json d = nlohmann::ordered_json::object();
        for (const auto& [vid, p] : dist) d[vid] = p;
        prefs[cid] = d;
    }
    j["preferences"] = prefs;
    if (!r.subregions.empty()) {
        j["subregions"] = nlohmann::ordered_json::array();
        for (const auto& s : r.subregions) j["subregions"].push_back(region_json(s));
    }
    return j;
}

} // namespace detail

inline synth_spec parse_synth_spec(const std::string& text) {
    nlohmann::json j = nlohmann::json::parse(text, nullptr, false);
    if (j.is_discarded() || !j.is_object()) throw error("synth spec: not a JSON object");
    try {
        synth_spec s;
        s.seed = j.value("seed", std::uint64_t{1});
        s.n_records = j.at("n_records").get<std::size_t>();
        s.noise_rate = j.value("noise_rate", 0.0);
        s.lang = j.value("lang", std::string("es"));
        if (j.contains("templates")) s.templates = j["templates"].get<std::vector<std::string>>();
        for (const auto& r : j.at("regions")) s.regions.push_back(detail::parse_region(r));
        return s;
    } catch (const nlohmann::json::exception& e) {
        throw error(std::string("synth spec: ") + e.what());
    }
}

inline synth_spec load_synth_spec(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw error("cannot open synth spec " + path.string());
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return parse_synth_spec(text);
}

inline std::string synth_spec_json(const synth_spec& s) {
    nlohmann::ordered_json j;
    j["seed"] = s.seed;
    j["n_records"] = s.n_records;
    j["noise_rate"] = s.noise_rate;
    j["lang"] = s.lang;
    j["templates"] = s.templates;
    j["regions"] = nlohmann::ordered_json::array();
    for (const auto& r : s.regions) j["regions"].push_back(detail::region_json(r));
    return j.dump(2) + "\n";
}

/// Planted-structure presets used by the tests and the `synth` command.
struct planted_options {
    std::size_t n_concepts = 20;
    std::size_t n_records = 50000;
    double noise_rate = 0.1;
    std::uint64_t seed = 1;
    /// Split the second top-level region into this many sub-regions (0 = none).
    std::size_t subregions = 0;
    /// Concepts (taken from the end of the concept list) on which the
    /// sub-regions differ from each other.
    std::size_t sub_concepts = 8;
};

/// Two well-separated top regions, A (Iberia-like box) and B (America-like),
/// each preferring a different variant of every concept. With subregions > 0,
/// B is split into disjoint boxes that additionally disagree on the last
/// `sub_concepts` concepts. A carries slightly more weight than B so it is
/// labelled α.
inline synth_spec planted_spec(const lexicon& lex, const planted_options& o) {
    const std::size_t needed = o.subregions ? std::max<std::size_t>(2, o.subregions + 1) : 2;
    std::vector<const concept_entry*> concepts;
    for (const auto& c : lex.concepts)
        if (c.variants.size() >= needed) concepts.push_back(&c);
    std::sort(concepts.begin(), concepts.end(), [](auto a, auto b) { return a->id < b->id; });
    if (concepts.size() < o.n_concepts)
        throw error("planted spec: lexicon has only " + std::to_string(concepts.size()) + " concepts with >= " +
                    std::to_string(needed) + " variants");
    concepts.resize(o.n_concepts);
    if (o.sub_concepts > o.n_concepts) throw error("planted spec: sub_concepts exceeds n_concepts");

    synth_spec s;
    s.seed = o.seed;
    s.n_records = o.n_records;
    s.noise_rate = o.noise_rate;
    s.templates = default_templates();

    synth_region a{"A", bbox::from_corners(36.0, -9.0, 44.0, -1.0), 0.55, {}, {}};
    synth_region b{"B", bbox::from_corners(-35.0, -110.0, 30.0, -50.0), 0.45, {}, {}};
    for (const auto* c : concepts) {
        a.preferences[c->id][c->variants[0].id] = 1.0;
        b.preferences[c->id][c->variants[1].id] = 1.0;
    }
    if (o.subregions == 0) {
        b.box = bbox::from_corners(15.0, -105.0, 23.0, -97.0);
        b.weight = 0.45;
    } else {
        const std::vector<bbox> boxes{
            bbox::from_corners(16.0, -104.0, 22.0, -98.0),  // Mexico-like
            bbox::from_corners(-38.0, -64.0, -32.0, -58.0), // Southern-cone-like
            bbox::from_corners(-16.0, -78.0, -10.0, -72.0), // Andes-like
            bbox::from_corners(4.0, -76.0, 10.0, -70.0),
            bbox::from_corners(-26.0, -60.0, -20.0, -54.0),
        };
        if (o.subregions > boxes.size()) throw error("planted spec: at most 5 sub-regions");
        for (std::size_t i = 0; i < o.subregions; ++i) {
            synth_region sub{"B" + std::to_string(i + 1), boxes[i], 1.0, {}, {}};
            for (std::size_t k = o.n_concepts - o.sub_concepts; k < o.n_concepts; ++k)
                sub.preferences[concepts[k]->id][concepts[k]->variants[i + 1].id] = 1.0;
            b.subregions.push_back(std::move(sub));
        }
    }
    s.regions = {a, b};
    return s;
}

struct truth_entry {
    std::string region;
    std::string subregion; // empty for single-level planting
};

struct synth_corpus {
    std::vector<std::string> lines;
    std::map<cell_id, truth_entry> truth;

    std::string text() const {
        std::string out;
        for (const auto& l : lines) {
            out += l;
            out += '\n';
        }
        return out;
    }
};

namespace detail {

struct resolved_region {
    std::string region;
    std::string subregion;
    bbox box;
    double weight;
    preference_table preferences;
};

inline void validate_distribution(const std::map<std::string, double>& dist, const std::string& where) {
    double sum = 0;
    for (const auto& [_, p] : dist) {
        if (!(p >= 0)) throw error("synth spec: negative probability in " + where);
        sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-9) throw error("synth spec: distribution for " + where + " sums to " + std::to_string(sum));
}

template <typename T>
std::size_t pick_weighted(const std::vector<T>& items, double (*weight)(const T&), rng& gen) {
    double total = 0;
    for (const auto& it : items) total += weight(it);
    const double target = gen.uniform() * total;
    double acc = 0;
    for (std::size_t i = 0; i < items.size(); ++i) {
        acc += weight(items[i]);
        if (target < acc) return i;
    }
    return items.size() - 1;
}

} // namespace detail

/// Generates JSONL records with planted regional preferences.
///
/// Each record picks a leaf region by weight, a uniform point in its box, a
/// concept uniformly, and a variant from the region's distribution (uniformly
/// among all the concept's variants with probability noise_rate). The
/// variant's canonical form is embedded in a template that contributes no
/// lexicon hits of its own. Cell truth is the majority leaf region of the
/// records falling in that cell.
inline synth_corpus gen_corpus(const synth_spec& spec, const lexicon& lex, const grid_spec& grid) {
    grid.validate();
    if (spec.regions.empty()) throw error("synth spec: no regions");
    if (!(spec.noise_rate >= 0 && spec.noise_rate <= 1)) throw error("synth spec: noise_rate must be in [0, 1]");
    const auto& templates = spec.templates.empty() ? default_templates() : spec.templates;

    // Flatten to leaf regions with resolved preferences.
    std::vector<detail::resolved_region> leaves;
    for (const auto& r : spec.regions) {
        if (!(r.weight > 0)) throw error("synth spec: region " + r.name + " needs a positive weight");
        if (r.subregions.empty()) {
            leaves.push_back({r.name, "", r.box, r.weight, r.preferences});
            continue;
        }
        double sub_total = 0;
        for (const auto& s : r.subregions) {
            if (!(s.weight > 0)) throw error("synth spec: sub-region " + s.name + " needs a positive weight");
            sub_total += s.weight;
        }
        for (const auto& s : r.subregions) {
            preference_table merged = r.preferences;
            for (const auto& [cid, dist] : s.preferences) merged[cid] = dist;
            leaves.push_back({r.name, s.name, s.box, r.weight * s.weight / sub_total, merged});
        }
    }

    std::set<std::string> concept_set;
    for (const auto& [cid, _] : leaves.front().preferences) concept_set.insert(cid);
    if (concept_set.empty()) throw error("synth spec: no concept preferences");
    for (const auto& leaf : leaves) {
        std::set<std::string> mine;
        for (const auto& [cid, dist] : leaf.preferences) {
            mine.insert(cid);
            const std::string where = leaf.region + (leaf.subregion.empty() ? "" : "/" + leaf.subregion) + " " + cid;
            detail::validate_distribution(dist, where);
            for (const auto& [vid, _] : dist)
                if (!lex.has_feature(cid, vid)) throw error("synth spec: unknown feature " + cid + ":" + vid);
        }
        if (mine != concept_set) throw error("synth spec: regions must all define the same concepts");
    }
    const std::vector<std::string> concepts(concept_set.begin(), concept_set.end());

    // Canonical text for each variant, and a check that every template yields
    // exactly the intended hit.
    matcher m(lex);
    std::map<std::string, std::vector<std::pair<std::string, std::string>>> forms; // concept -> (variant, text)
    for (const auto& cid : concepts) {
        const concept_entry* c = lex.find_concept(cid);
        for (const auto& v : c->variants) forms[cid].emplace_back(v.id, join_tokens(v.surface_forms.front(), " "));
    }
    for (const auto& t : templates) {
        auto pos = t.find("{}");
        if (pos == std::string::npos || t.find("{}", pos + 2) != std::string::npos)
            throw error("synth spec: template must contain exactly one {} placeholder: '" + t + "'");
        for (const auto& [cid, list] : forms) {
            for (const auto& [vid, text] : list) {
                std::string filled = t.substr(0, pos) + text + t.substr(pos + 2);
                auto hits = m.match_text(filled);
                if (hits.size() != 1 || hits[0].concept_id != cid || hits[0].variant_id != vid)
                    throw error("synth spec: template '" + t + "' does not isolate " + cid + ":" + vid);
            }
        }
    }

    rng gen(spec.seed);
    synth_corpus corpus;
    corpus.lines.reserve(spec.n_records);
    std::map<cell_id, std::map<std::size_t, std::size_t>> votes;
    auto leaf_weight = +[](const detail::resolved_region& r) { return r.weight; };

    for (std::size_t i = 0; i < spec.n_records; ++i) {
        const std::size_t li = detail::pick_weighted(leaves, leaf_weight, gen);
        const auto& leaf = leaves[li];
        const double lat = leaf.box.lat_min + gen.uniform() * (leaf.box.lat_max - leaf.box.lat_min);
        const double lon = leaf.box.lon_min + gen.uniform() * (leaf.box.lon_max - leaf.box.lon_min);
        const std::string& cid = concepts[gen.index(concepts.size())];
        const auto& options = forms[cid];

        std::string vid;
        if (gen.uniform() < spec.noise_rate) {
            vid = options[gen.index(options.size())].first;
        } else {
            const auto& dist = leaf.preferences.at(cid);
            const double target = gen.uniform();
            double acc = 0;
            for (const auto& [v, p] : dist) {
                vid = v;
                acc += p;
                if (target < acc) break;
            }
        }
        const std::string* text = nullptr;
        for (const auto& [v, t] : options)
            if (v == vid) text = &t;

        const std::string& tmpl = templates[gen.index(templates.size())];
        const auto pos = tmpl.find("{}");
        nlohmann::ordered_json j;
        j["text"] = tmpl.substr(0, pos) + *text + tmpl.substr(pos + 2);
        j["lat"] = lat;
        j["lon"] = lon;
        j["lang"] = spec.lang;
        corpus.lines.push_back(j.dump());
        ++votes[cell_of(lat, lon, grid)][li];
    }

    for (const auto& [cell, tally] : votes) {
        std::size_t best = tally.begin()->first;
        for (const auto& [li, n] : tally)
            if (n > tally.at(best)) best = li;
        corpus.truth[cell] = {leaves[best].region, leaves[best].subregion};
    }
    return corpus;
}

inline void write_truth(std::ostream& out, const std::map<cell_id, truth_entry>& truth) {
    bool two_level = std::any_of(truth.begin(), truth.end(), [](const auto& kv) { return !kv.second.subregion.empty(); });
    out << (two_level ? "cell\tregion\tsubregion\n" : "cell\tregion\n");
    for (const auto& [cell, t] : truth) {
        out << to_string(cell) << '\t' << t.region;
        if (two_level) out << '\t' << (t.subregion.empty() ? "-" : t.subregion);
        out << '\n';
    }
}

inline std::map<cell_id, truth_entry> read_truth(std::istream& in) {
    std::map<cell_id, truth_entry> truth;
    std::string line;
    bool header = false;
    while (detail::getline_clean(in, line)) {
        if (line.empty() || line.front() == '#') continue;
        auto f = detail::split(line, '\t');
        if (!header) {
            if (f.size() < 2 || f[0] != "cell" || f[1] != "region") throw error("truth: unexpected header '" + line + "'");
            header = true;
            continue;
        }
        if (f.size() < 2 || f.size() > 3) throw error("truth: expected cell<TAB>region[<TAB>subregion]");
        truth_entry t{std::string(f[1]), f.size() == 3 && f[2] != "-" ? std::string(f[2]) : std::string()};
        truth[parse_cell_id(f[0])] = t;
    }
    if (!header) throw error("truth: missing header");
    return truth;
}

// ---------------------------------------------------------------------------
// Recovery scoring

namespace detail {

inline double choose2(double n) { return n * (n - 1) / 2; }

template <typename Label>
std::vector<std::size_t> dense_ids(std::span<const Label> labels) {
    std::map<Label, std::size_t> ids;
    std::vector<std::size_t> out;
    out.reserve(labels.size());
    for (const auto& l : labels) out.push_back(ids.try_emplace(l, ids.size()).first->second);
    return out;
}

} // namespace detail

/// Adjusted Rand index (pair counting with expected-index correction). Two
/// trivial partitions that agree score 1.
template <typename LabelA, typename LabelB>
double adjusted_rand_index(std::span<const LabelA> pred, std::span<const LabelB> truth) {
    if (pred.size() != truth.size()) throw error("ARI: partitions have different lengths");
    if (pred.size() < 2) throw error("ARI: need at least 2 items");
    const auto a = detail::dense_ids(pred);
    const auto b = detail::dense_ids(truth);
    std::map<std::pair<std::size_t, std::size_t>, double> table;
    std::map<std::size_t, double> rows, cols;
    for (std::size_t i = 0; i < a.size(); ++i) {
        table[{a[i], b[i]}] += 1;
        rows[a[i]] += 1;
        cols[b[i]] += 1;
    }
    double index = 0, sum_a = 0, sum_b = 0;
    for (const auto& [_, n] : table) index += detail::choose2(n);
    for (const auto& [_, n] : rows) sum_a += detail::choose2(n);
    for (const auto& [_, n] : cols) sum_b += detail::choose2(n);
    const double expected = sum_a * sum_b / detail::choose2(static_cast<double>(a.size()));
    const double max_index = (sum_a + sum_b) / 2;
    if (max_index == expected) return 1.0;
    return (index - expected) / (max_index - expected);
}

template <typename LabelA, typename LabelB>
double adjusted_rand_index(const std::vector<LabelA>& pred, const std::vector<LabelB>& truth) {
    return adjusted_rand_index(std::span<const LabelA>(pred), std::span<const LabelB>(truth));
}

struct recovery_report {
    double ari = 0;
    std::size_t n_cells = 0;    // cells present in both model and truth
    std::size_t unmatched = 0;  // model cells without truth
    std::vector<std::string> cluster_labels;
    std::vector<std::string> truth_classes;
    std::vector<double> purity;                          // per predicted cluster
    std::vector<std::vector<std::size_t>> confusion;     // [truth class][cluster]
};

/// Compares cluster assignments with planted truth on the shared cells. With
/// `use_subregion`, the sub-region column is the truth class.
inline recovery_report evaluate_recovery(const cluster_model& model, const std::map<cell_id, truth_entry>& truth,
                                         bool use_subregion = false) {
    recovery_report rep;
    rep.cluster_labels = model.labels;
    std::vector<std::string> pred, actual;
    for (std::size_t r = 0; r < model.cells.size(); ++r) {
        auto it = truth.find(model.cells[r]);
        if (it == truth.end()) {
            ++rep.unmatched;
            continue;
        }
        pred.push_back(model.label_of_row(r));
        actual.push_back(use_subregion && !it->second.subregion.empty() ? it->second.subregion : it->second.region);
    }
    if (pred.empty()) throw error("evaluate: model and truth share no cells");
    rep.n_cells = pred.size();
    rep.ari = pred.size() >= 2 ? adjusted_rand_index(pred, actual) : 1.0;

    std::set<std::string> classes(actual.begin(), actual.end());
    rep.truth_classes.assign(classes.begin(), classes.end());
    std::map<std::string, std::size_t> class_index, cluster_index;
    for (std::size_t i = 0; i < rep.truth_classes.size(); ++i) class_index[rep.truth_classes[i]] = i;
    for (std::size_t j = 0; j < rep.cluster_labels.size(); ++j) cluster_index[rep.cluster_labels[j]] = j;
    rep.confusion.assign(rep.truth_classes.size(), std::vector<std::size_t>(rep.cluster_labels.size(), 0));
    for (std::size_t i = 0; i < pred.size(); ++i) ++rep.confusion[class_index[actual[i]]][cluster_index[pred[i]]];

    rep.purity.assign(rep.cluster_labels.size(), 0.0);
    for (std::size_t j = 0; j < rep.cluster_labels.size(); ++j) {
        std::size_t total = 0, best = 0;
        for (const auto& row : rep.confusion) {
            total += row[j];
            best = std::max(best, row[j]);
        }
        rep.purity[j] = total ? static_cast<double>(best) / static_cast<double>(total) : 0.0;
    }
    return rep;
}

inline void write_recovery(std::ostream& out, const recovery_report& rep) {
    out << "ari\t" << format_double(rep.ari) << "\n";
    out << "cells\t" << rep.n_cells << "\n";
    out << "unmatched\t" << rep.unmatched << "\n";
    for (std::size_t j = 0; j < rep.cluster_labels.size(); ++j)
        out << "purity\t" << rep.cluster_labels[j] << '\t' << format_double(rep.purity[j]) << "\n";
    out << "confusion";
    for (const auto& l : rep.cluster_labels) out << '\t' << l;
    out << "\n";
    for (std::size_t i = 0; i < rep.truth_classes.size(); ++i) {
        out << rep.truth_classes[i];
        for (auto n : rep.confusion[i]) out << '\t' << n;
        out << "\n";
    }
}

} // namespace lexdial
