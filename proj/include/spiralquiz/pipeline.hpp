#pragma once

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <numbers>
#include <optional>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "spiralquiz/assess.hpp"
#include "spiralquiz/codec.hpp"
#include "spiralquiz/layout.hpp"
#include "spiralquiz/png_io.hpp"
#include "spiralquiz/rectify.hpp"

namespace spiralquiz {

// ---------------------------------------------------------------- csv

namespace detail {

inline std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
    return out;
}

/// RFC-4180 records; quoted fields may hold commas, quotes, and newlines.
inline std::vector<std::vector<std::string>> csv_parse(const std::string& text) {
    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> row;
    std::string field;
    bool quoted = false, field_started = false;
    size_t i = 0;
    auto end_field = [&] {
        row.push_back(field);
        field.clear();
        field_started = false;
    };
    auto end_row = [&] {
        end_field();
        rows.push_back(row);
        row.clear();
    };
    while (i < text.size()) {
        char c = text[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    field += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                field += c;
            }
        } else if (c == '"' && !field_started) {
            quoted = true;
            field_started = true;
        } else if (c == ',') {
            end_field();
        } else if (c == '\n') {
            if (!field.empty() || field_started || !row.empty()) end_row();
        } else if (c != '\r') {
            field += c;
            field_started = true;
        }
        ++i;
    }
    if (!field.empty() || field_started || !row.empty()) end_row();
    return rows;
}

inline int parse_int(const std::string& s, const std::string& what) {
    try {
        size_t pos = 0;
        int v = std::stoi(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw std::invalid_argument("cannot parse " + what + " from '" + s + "'");
    }
}

inline std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << text;
    if (!out) throw std::runtime_error("write failed for " + path.string());
}

}  // namespace detail

// ---------------------------------------------------------------- roster

struct RosterEntry {
    StudentRecord student;
    int quiz_index = 0;
};

struct Roster {
    std::vector<RosterEntry> entries;

    const RosterEntry* find(int student_index) const {
        for (const auto& e : entries)
            if (e.student.student_index == student_index) return &e;
        return nullptr;
    }
};

inline void validate_roster(const Roster& roster) {
    std::vector<int> seen;
    for (const auto& e : roster.entries) {
        if (e.student.student_index < 0 || e.student.student_index > 1295)
            throw std::invalid_argument("roster: student index out of range");
        if (e.quiz_index < 0 || e.quiz_index > 124)
            throw std::invalid_argument("roster: quiz index out of range");
        seen.push_back(e.student.student_index);
    }
    std::sort(seen.begin(), seen.end());
    if (std::adjacent_find(seen.begin(), seen.end()) != seen.end())
        throw std::invalid_argument("roster: duplicate student index");
}

inline constexpr const char* kRosterHeader = "student_index,name,email,person_id,quiz_index";

inline std::string serialize_roster(const Roster& roster) {
    std::string out = std::string(kRosterHeader) + "\n";
    for (const auto& e : roster.entries) {
        out += std::to_string(e.student.student_index) + "," +
               detail::csv_field(e.student.name) + "," + detail::csv_field(e.student.email) +
               "," + detail::csv_field(e.student.person_id) + "," +
               std::to_string(e.quiz_index) + "\n";
    }
    return out;
}

inline Roster parse_roster(const std::string& text) {
    auto rows = detail::csv_parse(text);
    if (rows.empty() || rows[0] != detail::csv_parse(std::string(kRosterHeader) + "\n")[0])
        throw std::invalid_argument("roster: missing or unexpected header");
    Roster roster;
    for (size_t i = 1; i < rows.size(); ++i) {
        const auto& r = rows[i];
        if (r.size() != 5) throw std::invalid_argument("roster: wrong column count");
        RosterEntry e;
        e.student.student_index = detail::parse_int(r[0], "student_index");
        e.student.name = r[1];
        e.student.email = r[2];
        e.student.person_id = r[3];
        e.quiz_index = detail::parse_int(r[4], "quiz_index");
        roster.entries.push_back(std::move(e));
    }
    validate_roster(roster);
    return roster;
}

// ---------------------------------------------------------------- keys

inline std::string serialize_keys(const std::map<int, AnswerKey>& keys) {
    nlohmann::json j;
    j["version"] = 1;
    j["keys"] = nlohmann::json::array();
    for (const auto& [index, key] : keys) {
        nlohmann::json k;
        k["quiz_index"] = index;
        k["correct"] = key.correct;
        j["keys"].push_back(k);
    }
    return j.dump(2) + "\n";
}

inline std::map<int, AnswerKey> parse_keys(const std::string& text) {
    nlohmann::json j = nlohmann::json::parse(text);
    if (j.at("version").get<int>() != 1)
        throw std::invalid_argument("keys: unsupported version");
    std::map<int, AnswerKey> keys;
    for (const auto& k : j.at("keys")) {
        AnswerKey key;
        key.quiz_index = k.at("quiz_index").get<int>();
        if (key.quiz_index < 0 || key.quiz_index > 124)
            throw std::invalid_argument("keys: quiz index out of range");
        const auto& correct = k.at("correct");
        if (correct.size() != 20) throw std::invalid_argument("keys: expected 20 answers");
        for (int q = 0; q < 20; ++q) {
            key.correct[q] = correct.at(q).get<int>();
            if (key.correct[q] < 0 || key.correct[q] > 3)
                throw std::invalid_argument("keys: alternative out of range");
        }
        if (!keys.emplace(key.quiz_index, key).second)
            throw std::invalid_argument("keys: duplicate quiz index");
    }
    return keys;
}

// ---------------------------------------------------------------- manifest

struct ManifestEntry {
    std::string file;
    int student_index = 0;
    int quiz_index = 0;
};

inline std::string serialize_manifest(const std::vector<ManifestEntry>& entries) {
    nlohmann::json j;
    j["version"] = 1;
    j["sheets"] = nlohmann::json::array();
    for (const auto& e : entries)
        j["sheets"].push_back({{"file", e.file},
                               {"student_index", e.student_index},
                               {"quiz_index", e.quiz_index}});
    return j.dump(2) + "\n";
}

inline std::vector<ManifestEntry> parse_manifest(const std::string& text) {
    nlohmann::json j = nlohmann::json::parse(text);
    if (j.at("version").get<int>() != 1)
        throw std::invalid_argument("manifest: unsupported version");
    std::vector<ManifestEntry> entries;
    for (const auto& e : j.at("sheets"))
        entries.push_back({e.at("file").get<std::string>(), e.at("student_index").get<int>(),
                           e.at("quiz_index").get<int>()});
    return entries;
}

// ---------------------------------------------------------------- generate

/// Render one sheet per roster entry into out_dir and write manifest.json.
/// Nothing is written until the whole roster validates.
inline std::vector<ManifestEntry> generate_batch(const SheetLayout& layout, const Roster& roster,
                                                 const std::filesystem::path& out_dir) {
    validate_layout(layout);
    validate_roster(roster);
    std::filesystem::create_directories(out_dir);
    std::vector<ManifestEntry> manifest;
    for (const auto& e : roster.entries) {
        char name[40];
        std::snprintf(name, sizeof(name), "sheet_s%04d_q%03d.png", e.student.student_index,
                      e.quiz_index);
        GrayImage sheet = render_sheet(layout, encode_quiz(e.quiz_index), e.student);
        write_png((out_dir / name).string(), sheet);
        manifest.push_back({name, e.student.student_index, e.quiz_index});
    }
    detail::write_text_file(out_dir / "manifest.json", serialize_manifest(manifest));
    return manifest;
}

// ---------------------------------------------------------------- simulate

struct ScanParams {
    double rotation_deg = 0.0;
    double scale = 1.0;
    double noise_sigma = 0.0;
    double occlusion = 0.0;  // fraction of each spiral's angular range masked
    uint32_t seed = 0;
};

/// Deterministic scan degradation: rotation/scale about the sheet center on
/// an expanded canvas, one white sector per spiral anchor, then clipped
/// Gaussian noise. All-default parameters return the input bit-identically.
inline GrayImage simulate_scan(const GrayImage& sheet, const SheetLayout& layout,
                               const ScanParams& p) {
    if (!(p.scale > 0.0)) throw std::invalid_argument("simulate_scan: scale must be positive");
    if (p.noise_sigma < 0.0 || p.occlusion < 0.0 || p.occlusion > 1.0)
        throw std::invalid_argument("simulate_scan: parameter out of range");
    const bool geom = p.rotation_deg != 0.0 || p.scale != 1.0;
    if (!geom && p.noise_sigma == 0.0 && p.occlusion == 0.0) return sheet;

    const double theta = p.rotation_deg * std::numbers::pi / 180.0;
    SimilarityTransform fwd;  // sheet px -> scan px
    GrayImage img;
    if (geom) {
        const double ac = std::fabs(std::cos(theta)), as = std::fabs(std::sin(theta));
        const int w2 = static_cast<int>(
            std::ceil(p.scale * (sheet.width * ac + sheet.height * as)));
        const int h2 = static_cast<int>(
            std::ceil(p.scale * (sheet.width * as + sheet.height * ac)));
        Vec2 src_c = {(sheet.width - 1) / 2.0, (sheet.height - 1) / 2.0};
        Vec2 dst_c = {(w2 - 1) / 2.0, (h2 - 1) / 2.0};
        fwd.rotation = theta;
        fwd.scale = p.scale;
        fwd.translation = {0.0, 0.0};
        Vec2 mapped = fwd.apply(src_c);
        fwd.translation = dst_c - mapped;
        img = warp_similarity(sheet, fwd.inverse(), w2, h2, 1.0f);
    } else {
        img = sheet;
    }

    std::mt19937 rng(p.seed);
    auto uniform = [&rng]() { return (rng() >> 8) * (1.0 / 16777216.0); };

    if (p.occlusion > 0.0) {
        const double radius =
            4.5 * layout.spiral_extent * pixels_per_unit(layout) * p.scale;
        const double half = p.occlusion * std::numbers::pi;
        std::vector<Vec2> anchors(layout.corner_anchors.begin(), layout.corner_anchors.end());
        anchors.insert(anchors.end(), layout.bottom_anchors.begin(),
                       layout.bottom_anchors.end());
        for (const auto& anchor : anchors) {
            Vec2 c = fwd.apply(layout_to_px(layout, anchor));
            double dir = uniform() * 2.0 * std::numbers::pi - std::numbers::pi;
            int x0 = std::max(0, static_cast<int>(std::floor(c.x - radius)));
            int x1 = std::min(img.width - 1, static_cast<int>(std::ceil(c.x + radius)));
            int y0 = std::max(0, static_cast<int>(std::floor(c.y - radius)));
            int y1 = std::min(img.height - 1, static_cast<int>(std::ceil(c.y + radius)));
            for (int y = y0; y <= y1; ++y)
                for (int x = x0; x <= x1; ++x) {
                    double dx = x - c.x, dy = y - c.y;
                    if (dx * dx + dy * dy > radius * radius) continue;
                    double d = std::remainder(std::atan2(dy, dx) - dir, 2.0 * std::numbers::pi);
                    if (std::fabs(d) <= half) img.at(x, y) = 1.0f;
                }
        }
    }

    if (p.noise_sigma > 0.0) {
        for (auto& v : img.samples) {
            double u1 = uniform(), u2 = uniform();
            double z = std::sqrt(-2.0 * std::log(1.0 - u1)) *
                       std::cos(2.0 * std::numbers::pi * u2);
            v = std::clamp(v + static_cast<float>(p.noise_sigma * z), 0.0f, 1.0f);
        }
    }
    return img;
}

// ---------------------------------------------------------------- correct

struct ResultRow {
    std::string source;
    int student_index = 0;
    std::string name, email, person_id;
    int quiz_index = 0;
    int score = 0;
    std::string verdicts;  // 20 chars, C/X/B/M
    std::vector<std::string> flags;
};

struct ReviewEntry {
    std::string source;
    std::string reason;
};

struct BatchResult {
    std::vector<ResultRow> rows;
    std::vector<ReviewEntry> review;
};

inline constexpr const char* kResultsHeader =
    "source,student_index,name,email,person_id,quiz_index,score,verdicts,flags";

inline std::string serialize_results(const std::vector<ResultRow>& rows) {
    std::string out = std::string(kResultsHeader) + "\n";
    for (const auto& r : rows) {
        std::string flags;
        for (const auto& f : r.flags) {
            if (!flags.empty()) flags += ';';
            flags += f;
        }
        out += detail::csv_field(r.source) + "," + std::to_string(r.student_index) + "," +
               detail::csv_field(r.name) + "," + detail::csv_field(r.email) + "," +
               detail::csv_field(r.person_id) + "," + std::to_string(r.quiz_index) + "," +
               std::to_string(r.score) + "," + r.verdicts + "," + detail::csv_field(flags) +
               "\n";
    }
    return out;
}

inline std::vector<ResultRow> parse_results(const std::string& text) {
    auto rows = detail::csv_parse(text);
    if (rows.empty() || rows[0] != detail::csv_parse(std::string(kResultsHeader) + "\n")[0])
        throw std::invalid_argument("results: missing or unexpected header");
    std::vector<ResultRow> out;
    for (size_t i = 1; i < rows.size(); ++i) {
        const auto& r = rows[i];
        if (r.size() != 9) throw std::invalid_argument("results: wrong column count");
        ResultRow row;
        row.source = r[0];
        row.student_index = detail::parse_int(r[1], "student_index");
        row.name = r[2];
        row.email = r[3];
        row.person_id = r[4];
        row.quiz_index = detail::parse_int(r[5], "quiz_index");
        row.score = detail::parse_int(r[6], "score");
        row.verdicts = r[7];
        if (!r[8].empty()) {
            std::stringstream ss(r[8]);
            std::string flag;
            while (std::getline(ss, flag, ';')) row.flags.push_back(flag);
        }
        out.push_back(std::move(row));
    }
    return out;
}

inline std::string serialize_review(const std::vector<ReviewEntry>& entries) {
    std::string out = "source,reason\n";
    for (const auto& e : entries)
        out += detail::csv_field(e.source) + "," + detail::csv_field(e.reason) + "\n";
    return out;
}

/// Correct every PNG in scan_dir: align, decode identity, read marks, grade,
/// and write the annotated sheet. Sheets that fail land on the review list;
/// one bad sheet never aborts the batch. Row order follows filename order.
inline BatchResult correct_batch(const std::filesystem::path& scan_dir,
                                 const SheetLayout& layout,
                                 const std::map<int, AnswerKey>& keys, const Roster& roster,
                                 const std::filesystem::path& out_dir, int jobs = 1) {
    validate_layout(layout);
    validate_roster(roster);
    std::vector<std::filesystem::path> inputs;
    for (const auto& entry : std::filesystem::directory_iterator(scan_dir)) {
        if (!entry.is_regular_file()) continue;
        std::string ext = entry.path().extension().string();
        std::transform(ext.begin(), ext.end(), ext.begin(),
                       [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
        if (ext == ".png") inputs.push_back(entry.path());
    }
    std::sort(inputs.begin(), inputs.end());
    std::filesystem::create_directories(out_dir);

    std::vector<std::optional<ResultRow>> rows(inputs.size());
    std::vector<std::optional<ReviewEntry>> review(inputs.size());

    auto process = [&](size_t i) {
        const std::string source = inputs[i].filename().string();
        try {
            GrayImage scan = read_png_gray(inputs[i].string());
            RectifiedSheet rect = rectify(scan, layout);
            SheetIdentity id = decode_identity(rect, layout);
            int quiz_index = decode_quiz(id.quiz);
            int student_index = decode_student(id.student);

            auto key = keys.find(quiz_index);
            if (key == keys.end()) {
                review[i] = ReviewEntry{source, "no answer key for quiz " +
                                                    std::to_string(quiz_index)};
                return;
            }
            const RosterEntry* entry = roster.find(student_index);
            if (!entry) {
                review[i] = ReviewEntry{source, "student " + std::to_string(student_index) +
                                                    " not in roster"};
                return;
            }
            auto readings = read_answers(rect, layout);
            GradeRecord record = grade(readings, key->second, student_index, quiz_index);
            record.flags = id.flags;
            if (entry->quiz_index != quiz_index)
                record.flags.push_back("quiz_mismatch_roster");

            ColorImage annotated = annotate(rect, layout, record, key->second);
            write_png((out_dir / ("annotated_" + source)).string(), annotated);

            ResultRow row;
            row.source = source;
            row.student_index = student_index;
            row.name = entry->student.name;
            row.email = entry->student.email;
            row.person_id = entry->student.person_id;
            row.quiz_index = quiz_index;
            row.score = record.score;
            for (Verdict v : record.verdicts) row.verdicts += verdict_code(v);
            row.flags = record.flags;
            rows[i] = std::move(row);
        } catch (const AlignmentError& e) {
            review[i] = ReviewEntry{source, std::string("alignment failure: ") + e.what()};
        } catch (const DecodeError& e) {
            review[i] = ReviewEntry{source, std::string("decode failure: ") + e.what()};
        } catch (const std::exception& e) {
            review[i] = ReviewEntry{source, std::string("error: ") + e.what()};
        }
    };

    jobs = std::max(1, jobs);
    if (jobs == 1 || inputs.size() <= 1) {
        for (size_t i = 0; i < inputs.size(); ++i) process(i);
    } else {
        std::atomic<size_t> next{0};
        std::vector<std::thread> workers;
        int n = std::min<size_t>(jobs, inputs.size());
        for (int t = 0; t < n; ++t)
            workers.emplace_back([&] {
                for (size_t i = next.fetch_add(1); i < inputs.size(); i = next.fetch_add(1))
                    process(i);
            });
        for (auto& w : workers) w.join();
    }

    BatchResult result;
    for (auto& r : rows)
        if (r) result.rows.push_back(std::move(*r));
    for (auto& r : review)
        if (r) result.review.push_back(std::move(*r));
    detail::write_text_file(out_dir / "results.csv", serialize_results(result.rows));
    detail::write_text_file(out_dir / "review.csv", serialize_review(result.review));
    return result;
}

// ---------------------------------------------------------------- dispatch

enum class DetailPolicy { score_only, per_question };

struct OutboxMessage {
    std::string recipient;
    std::string subject;
    std::string body;
};

/// Message sink. Implementations throw on failure; the dispatcher records
/// the failure and carries on.
class MailTransport {
  public:
    virtual ~MailTransport() = default;
    virtual void send(const OutboxMessage& message) = 0;
};

/// Default sink: one plain-text file per message in a directory.
class FileOutbox final : public MailTransport {
  public:
    explicit FileOutbox(std::filesystem::path dir) : dir_(std::move(dir)) {
        std::filesystem::create_directories(dir_);
    }

    void send(const OutboxMessage& message) override {
        std::string safe;
        for (char c : message.recipient)
            safe += (std::isalnum(static_cast<unsigned char>(c)) || c == '.' || c == '-')
                        ? c
                        : '_';
        char prefix[16];
        std::snprintf(prefix, sizeof(prefix), "msg_%04d_", seq_++);
        detail::write_text_file(dir_ / (prefix + safe + ".txt"),
                                "To: " + message.recipient + "\nSubject: " + message.subject +
                                    "\n\n" + message.body);
    }

  private:
    std::filesystem::path dir_;
    int seq_ = 0;
};

inline const char* verdict_word(char code) {
    switch (code) {
        case 'C': return "correct";
        case 'X': return "incorrect";
        case 'B': return "blank";
        case 'M': return "multiple answers";
    }
    return "unknown";
}

inline OutboxMessage build_message(const ResultRow& row, DetailPolicy policy) {
    OutboxMessage m;
    m.recipient = row.email;
    m.subject = "Quiz " + std::to_string(row.quiz_index) + " result";
    m.body = "Score: " + std::to_string(row.score) + "/20\n";
    if (policy == DetailPolicy::per_question) {
        for (size_t q = 0; q < row.verdicts.size(); ++q)
            m.body += "Q" + std::to_string(q + 1) + ": " + verdict_word(row.verdicts[q]) + "\n";
    }
    return m;
}

struct DeliveryEntry {
    std::string recipient;
    bool ok = false;
    std::string detail;
};

inline std::string serialize_delivery_report(const std::vector<DeliveryEntry>& entries) {
    std::string out = "recipient,status,detail\n";
    for (const auto& e : entries)
        out += detail::csv_field(e.recipient) + "," + (e.ok ? "sent" : "failed") + "," +
               detail::csv_field(e.detail) + "\n";
    return out;
}

/// Send one message per result row; transport failures are recorded per
/// recipient and never abort the run.
inline std::vector<DeliveryEntry> dispatch_results(const std::vector<ResultRow>& rows,
                                                   DetailPolicy policy,
                                                   MailTransport& transport) {
    std::vector<DeliveryEntry> report;
    for (const auto& row : rows) {
        DeliveryEntry entry;
        entry.recipient = row.email;
        if (row.email.empty()) {
            entry.detail = "missing recipient address";
            report.push_back(entry);
            continue;
        }
        try {
            transport.send(build_message(row, policy));
            entry.ok = true;
        } catch (const std::exception& e) {
            entry.detail = e.what();
        }
        report.push_back(entry);
    }
    return report;
}

}  // namespace spiralquiz
