#include <gtest/gtest.h>

#include <memory>
#include <random>
#include <sstream>

#include "lexdial/ingest.hpp"

using namespace lexdial;

namespace {

const matcher& bundled() {
    static const matcher m(load_lexicon(std::string(LEXDIAL_DATA_DIR) + "/varilex.tsv"));
    return m;
}

ingest_result ingest_text(const std::string& text, const ingest_filters& filters = {}) {
    std::istringstream in(text);
    return ingest_stream(in, bundled(), grid_spec{}, filters);
}

} // namespace

TEST(ParseRecord, WellFormed) {
    auto r = parse_record(R"({"text":"tengo gripa","lat":4.6,"lon":-74.1,"lang":"es","ts":"2014-05-01T10:00:00Z"})");
    ASSERT_TRUE(std::holds_alternative<record>(r));
    const auto& rec = std::get<record>(r);
    EXPECT_EQ(rec.text, "tengo gripa");
    EXPECT_DOUBLE_EQ(rec.lat, 4.6);
    EXPECT_DOUBLE_EQ(rec.lon, -74.1);
    EXPECT_EQ(rec.lang, "es");
    EXPECT_EQ(rec.timestamp, "2014-05-01T10:00:00Z");
}

TEST(ParseRecord, SkipReasons) {
    auto reason = [](std::string_view line, const ingest_filters& f = {}) {
        auto r = parse_record(line, f);
        return std::holds_alternative<skip_reason>(r) ? std::get<skip_reason>(r) : static_cast<skip_reason>(99);
    };
    EXPECT_EQ(reason(R"({"text":"x","lon":-74.1})"), skip_reason::missing_coordinates);
    EXPECT_EQ(reason(R"({"text":"x","lat":null,"lon":-74.1})"), skip_reason::missing_coordinates);
    EXPECT_EQ(reason(R"({"text":"x","lat":95,"lon":0})"), skip_reason::out_of_range);
    EXPECT_EQ(reason(R"({"text":"x","lat":0,"lon":-181})"), skip_reason::out_of_range);
    EXPECT_EQ(reason(R"({"text":"x","lat":"4.6","lon":0})"), skip_reason::malformed);
    EXPECT_EQ(reason(R"({"text":"x","lat":4.6,)"), skip_reason::malformed);
    EXPECT_EQ(reason("[1,2]"), skip_reason::malformed);
    EXPECT_EQ(reason(""), skip_reason::malformed);
    EXPECT_EQ(reason(R"({"lat":1,"lon":1})"), skip_reason::missing_text);
    EXPECT_EQ(reason(R"({"text":"","lat":1,"lon":1})"), skip_reason::missing_text);

    ingest_filters es{"es", std::nullopt};
    EXPECT_EQ(reason(R"({"text":"x","lat":1,"lon":1,"lang":"pt"})", es), skip_reason::wrong_language);
    EXPECT_EQ(reason(R"({"text":"x","lat":1,"lon":1})", es), skip_reason::wrong_language);
    ingest_filters spain{std::nullopt, bbox::from_corners(44, -10, 36, 4)};
    EXPECT_EQ(reason(R"({"text":"x","lat":4.6,"lon":-74.1})", spain), skip_reason::outside_bbox);
    EXPECT_TRUE(std::holds_alternative<record>(parse_record(R"({"text":"x","lat":40.4,"lon":-3.7})", spain)));
}

TEST(IngestStream, SingleHit) {
    auto r = ingest_text(R"({"text":"tengo gripa","lat":4.6,"lon":-74.1,"lang":"es"})"
                         "\n");
    ASSERT_EQ(r.counts.entries.size(), 1u);
    const auto& [key, n] = *r.counts.entries.begin();
    EXPECT_EQ(key.cell, cell_of(4.6, -74.1, grid_spec{}));
    EXPECT_EQ(key.concept_id, "C182");
    EXPECT_EQ(key.variant_id, "gripa");
    EXPECT_EQ(n, 1u);
    EXPECT_EQ(r.report.hits, 1u);
    EXPECT_EQ(r.report.records_kept, 1u);
}

TEST(IngestStream, RepeatedRecordAdds) {
    const std::string line = R"({"text":"tengo gripa","lat":4.6,"lon":-74.1,"lang":"es"})";
    auto r = ingest_text(line + "\n" + line + "\n");
    ASSERT_EQ(r.counts.entries.size(), 1u);
    EXPECT_EQ(r.counts.entries.begin()->second, 2u);
}

TEST(IngestStream, LanguageFilterDropsRecord) {
    auto r = ingest_text(R"({"text":"tengo gripa","lat":4.6,"lon":-74.1,"lang":"pt"})"
                         "\n",
                         ingest_filters{"es", std::nullopt});
    EXPECT_TRUE(r.counts.entries.empty());
    EXPECT_EQ(r.report.skips[static_cast<std::size_t>(skip_reason::wrong_language)], 1u);
    EXPECT_EQ(r.report.lines_read, 1u);
}

TEST(IngestStream, AccountingInvariants) {
    std::mt19937 gen(3);
    std::vector<std::string> texts{"tengo gripa y gripe", "hola", "la cinta scotch", "echar de menos el mar",
                                   "extrañar resfrío resfriado"};
    std::string corpus;
    for (int i = 0; i < 400; ++i) {
        switch (gen() % 6) {
        case 0: corpus += "not json\n"; break;
        case 1: corpus += R"({"text":"gripa","lat":123,"lon":0})" "\n"; break;
        default: {
            double lat = -60 + static_cast<double>(gen() % 12000) / 100.0;
            double lon = -120 + static_cast<double>(gen() % 12000) / 100.0;
            corpus += R"({"text":")" + texts[gen() % texts.size()] + R"(","lat":)" + std::to_string(lat) +
                      R"(,"lon":)" + std::to_string(lon) + "}\n";
        }
        }
    }
    auto r = ingest_text(corpus);
    EXPECT_EQ(r.report.lines_read, 400u);
    EXPECT_EQ(r.report.lines_read, r.report.records_kept + r.report.total_skips());
    EXPECT_EQ(r.counts.total(), r.report.hits);
    EXPECT_GT(r.report.hits, 0u);
}

TEST(IngestStream, ShardingIsSound) {
    std::mt19937 gen(11);
    std::vector<std::string> lines;
    for (int i = 0; i < 300; ++i) {
        double lat = 10 + static_cast<double>(gen() % 300) / 100.0;
        double lon = -70 + static_cast<double>(gen() % 300) / 100.0;
        const char* t = (gen() % 2) ? "gripa" : "mucho resfrío y gripe";
        lines.push_back(R"({"text":")" + std::string(t) + R"(","lat":)" + std::to_string(lat) + R"(,"lon":)" +
                        std::to_string(lon) + "}");
    }
    std::string all;
    for (const auto& l : lines) all += l + "\n";
    auto whole = ingest_text(all);

    for (std::size_t shards : {2u, 3u, 8u}) {
        std::vector<std::string> parts(shards);
        for (std::size_t i = 0; i < lines.size(); ++i) parts[(i * 7) % shards] += lines[i] + "\n";
        for (std::size_t threads : {1u, 4u}) {
            auto sharded = ingest_sharded(
                shards, [&](std::size_t i) { return std::make_unique<std::istringstream>(parts[i]); }, bundled(),
                grid_spec{}, {}, threads);
            EXPECT_EQ(sharded.counts, whole.counts);
            EXPECT_EQ(sharded.report, whole.report);
        }
    }
}

TEST(IngestStream, ShardFailurePropagates) {
    EXPECT_THROW(ingest_sharded(
                     2, [](std::size_t i) -> std::unique_ptr<std::istream> {
                         if (i == 1) throw error("boom");
                         return std::make_unique<std::istringstream>("");
                     },
                     bundled(), grid_spec{}),
                 error);
}

TEST(IngestReport, JsonCounters) {
    auto r = ingest_text("bad\n" R"({"text":"gripa","lat":1,"lon":1})" "\n");
    auto j = r.report.to_json();
    EXPECT_EQ(j["lines_read"], 2);
    EXPECT_EQ(j["skips"]["malformed"], 1);
    EXPECT_NE(r.report.summary().find("malformed: 1"), std::string::npos);
}
