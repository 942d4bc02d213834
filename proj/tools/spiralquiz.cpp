#include <exception>
#include <filesystem>
#include <iostream>
#include <memory>
#include <string>

#include <CLI11.hpp>

#include <spiralquiz/mail_http.hpp>
#include <spiralquiz/spiralquiz.hpp>

namespace fs = std::filesystem;
using namespace spiralquiz;

namespace {

SheetLayout load_layout(const std::string& path) {
    return parse_layout(detail::read_text_file(path));
}

int run_init(const std::string& layout_path, int dpi) {
    SheetLayout layout = default_layout(dpi);
    detail::write_text_file(layout_path, serialize_layout(layout));
    std::cout << "wrote " << layout_path << "\n";
    return 0;
}

int run_generate(const std::string& layout_path, const std::string& roster_path,
                 const std::string& out_dir) {
    SheetLayout layout = load_layout(layout_path);
    Roster roster = parse_roster(detail::read_text_file(roster_path));
    auto manifest = generate_batch(layout, roster, out_dir);
    std::cout << "generated " << manifest.size() << " sheets into " << out_dir << "\n";
    return 0;
}

int run_simulate(const std::string& layout_path, const std::string& in_path,
                 const std::string& out_path, const ScanParams& params) {
    SheetLayout layout = load_layout(layout_path);
    GrayImage sheet = read_png_gray(in_path);
    GrayImage scan = simulate_scan(sheet, layout, params);
    write_png(out_path, scan);
    std::cout << "wrote " << out_path << " (" << scan.width << "x" << scan.height << ")\n";
    return 0;
}

int run_correct(const std::string& layout_path, const std::string& keys_path,
                const std::string& roster_path, const std::string& scan_dir,
                const std::string& out_dir, int jobs) {
    SheetLayout layout = load_layout(layout_path);
    auto keys = parse_keys(detail::read_text_file(keys_path));
    Roster roster = parse_roster(detail::read_text_file(roster_path));
    BatchResult batch = correct_batch(scan_dir, layout, keys, roster, out_dir, jobs);
    std::cout << "processed " << (batch.rows.size() + batch.review.size()) << " sheets: "
              << batch.rows.size() << " graded, " << batch.review.size() << " for review\n";
    for (const auto& e : batch.review)
        std::cout << "  review: " << e.source << ": " << e.reason << "\n";
    return batch.review.empty() ? 0 : 2;
}

int run_dispatch(const std::string& results_path, const std::string& policy_name,
                 const std::string& outbox_dir, const std::string& endpoint,
                 const std::string& report_path) {
    auto rows = parse_results(detail::read_text_file(results_path));
    DetailPolicy policy =
        policy_name == "per-question" ? DetailPolicy::per_question : DetailPolicy::score_only;
    std::unique_ptr<MailTransport> transport;
    if (!endpoint.empty())
        transport = std::make_unique<HttpPostTransport>(endpoint);
    else
        transport = std::make_unique<FileOutbox>(outbox_dir);
    auto report = dispatch_results(rows, policy, *transport);
    std::string text = serialize_delivery_report(report);
    if (report_path.empty())
        std::cout << text;
    else
        detail::write_text_file(report_path, text);
    size_t failed = 0;
    for (const auto& e : report)
        if (!e.ok) ++failed;
    std::cout << "dispatched " << (report.size() - failed) << "/" << report.size()
              << " messages\n";
    return failed == 0 ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Paper quizzes with spiral fiducial codes: generate answer sheets, "
                 "simulate scans, correct batches, dispatch results"};
    app.set_config("--config", "", "Read option defaults from an INI/TOML file");
    app.require_subcommand(1);

    std::string layout_path = "layout.json";
    std::string roster_path = "roster.csv";
    std::string keys_path = "keys.json";

    auto* init = app.add_subcommand("init", "Write a default layout file");
    int init_dpi = 150;
    init->add_option("--layout", layout_path, "Layout file to write")->capture_default_str();
    init->add_option("--dpi", init_dpi, "Render resolution")->capture_default_str();

    auto* generate = app.add_subcommand("generate", "Render one sheet per roster entry");
    std::string gen_out = "sheets";
    generate->add_option("--layout", layout_path, "Layout file")->capture_default_str();
    generate->add_option("--roster", roster_path, "Roster CSV")->capture_default_str();
    generate->add_option("--out", gen_out, "Output directory")->capture_default_str();

    auto* simulate = app.add_subcommand("simulate", "Degrade a sheet image like a scanner");
    std::string sim_in, sim_out;
    ScanParams params;
    simulate->add_option("input", sim_in, "Sheet PNG")->required();
    simulate->add_option("output", sim_out, "Output PNG")->required();
    simulate->add_option("--layout", layout_path, "Layout file")->capture_default_str();
    simulate->add_option("--rotation", params.rotation_deg, "Rotation in degrees")
        ->capture_default_str();
    simulate->add_option("--scale", params.scale, "Scale factor")->capture_default_str();
    simulate->add_option("--noise", params.noise_sigma, "Gaussian noise sigma")
        ->capture_default_str();
    simulate->add_option("--occlusion", params.occlusion, "Angular fraction masked per spiral")
        ->check(CLI::Range(0.0, 1.0))
        ->capture_default_str();
    simulate->add_option("--seed", params.seed, "Random seed")->capture_default_str();

    auto* correct = app.add_subcommand("correct", "Grade a directory of scanned sheets");
    std::string scan_dir, correct_out = "graded";
    int jobs = 1;
    correct->add_option("--layout", layout_path, "Layout file")->capture_default_str();
    correct->add_option("--keys", keys_path, "Answer keys JSON")->capture_default_str();
    correct->add_option("--roster", roster_path, "Roster CSV")->capture_default_str();
    correct->add_option("--scans", scan_dir, "Directory of scanned PNGs")->required();
    correct->add_option("--out", correct_out, "Output directory")->capture_default_str();
    correct->add_option("--jobs", jobs, "Worker threads")->check(CLI::PositiveNumber)
        ->capture_default_str();

    auto* dispatch = app.add_subcommand("dispatch", "Send per-student result messages");
    std::string results_path = "graded/results.csv";
    std::string policy = "score-only";
    std::string outbox_dir = "outbox";
    std::string endpoint, report_path;
    dispatch->add_option("--results", results_path, "Results CSV")->capture_default_str();
    dispatch->add_option("--policy", policy, "Detail level")
        ->check(CLI::IsMember({"score-only", "per-question"}))
        ->capture_default_str();
    dispatch->add_option("--outbox", outbox_dir, "Outbox directory (default transport)")
        ->capture_default_str();
    dispatch->add_option("--endpoint", endpoint, "HTTP endpoint instead of the outbox");
    dispatch->add_option("--report", report_path, "Write the delivery report here");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (init->parsed()) return run_init(layout_path, init_dpi);
        if (generate->parsed()) return run_generate(layout_path, roster_path, gen_out);
        if (simulate->parsed()) return run_simulate(layout_path, sim_in, sim_out, params);
        if (correct->parsed())
            return run_correct(layout_path, keys_path, roster_path, scan_dir, correct_out,
                               jobs);
        if (dispatch->parsed())
            return run_dispatch(results_path, policy, outbox_dir, endpoint, report_path);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
