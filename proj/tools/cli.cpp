#include "cli.hpp"

#include "bimsgc/config.hpp"
#include "bimsgc/evaluation.hpp"
#include "bimsgc/family_io.hpp"
#include "bimsgc/gradcheck.hpp"
#include "bimsgc/miest.hpp"
#include "bimsgc/optimize.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>
#include <omp.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace bimsgc {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Flags {
    std::string config;
    std::string out = ".";
    std::string dataset;
    std::string family;
    std::uint64_t seed = 0;
    int trials = 0;
    std::string mode;
    std::string strategy;
    bool full_epochs = false;
    std::vector<double> scales;
    std::vector<std::string> archs;
    bool whole = false;
    std::string inject_fault;
    std::vector<std::string> reports;
    std::string timings;

    std::vector<CLI::Option*> seed_opts;  // one per subcommand
};

void write_text(const fs::path& file, const std::string& text) {
    if (file.has_parent_path()) fs::create_directories(file.parent_path());
    std::ofstream os(file, std::ios::binary);
    if (!os) throw LoadError("cannot write " + file.string());
    os << text;
    if (!os) throw LoadError("write failed: " + file.string());
}

std::string read_text(const fs::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw LoadError("cannot open " + file.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::string num(double v) {
    std::ostringstream os;
    os << std::setprecision(17) << v;
    return os.str();
}

// Config file, then flags (last wins).
CondenseConfig resolve_config(const Flags& f) {
    CondenseConfig cfg;
    if (!f.config.empty()) {
        cfg = load_config(f.config);
        const fs::path base = fs::path(f.config).parent_path();
        if (!cfg.dataset.empty() && fs::path(cfg.dataset).is_relative() && !base.empty())
            cfg.dataset = (base / cfg.dataset).lexically_normal().string();
    }
    if (!f.dataset.empty()) cfg.dataset = f.dataset;
    for (auto* o : f.seed_opts)
        if (o->count() > 0) cfg.seed = f.seed;
    if (f.trials != 0) cfg.eval.trials = f.trials;
    if (!f.mode.empty()) cfg.eval.mode = f.mode;
    if (!f.strategy.empty()) cfg.strategy = f.strategy;
    if (f.full_epochs) cfg.eval.full = true;
    if (!f.archs.empty()) {
        if (f.archs.size() == 1 && f.archs[0] == "all")
            cfg.eval.archs = all_arch_names();
        else
            cfg.eval.archs = f.archs;
    }
    validate(cfg);
    return cfg;
}

std::string dataset_name(const CondenseConfig& cfg) {
    fs::path p = fs::path(cfg.dataset).lexically_normal();
    if (!p.has_filename()) p = p.parent_path();
    return p.filename().string();
}

std::string scale_dir(double rate) {
    std::ostringstream os;
    os << "scale_" << std::setprecision(6) << rate;
    return os.str();
}

std::string timings_csv(const std::vector<PhaseTiming>& t) {
    std::ostringstream os;
    os << "phase,seconds\n";
    for (const auto& p : t) os << p.phase << "," << num(p.seconds) << "\n";
    return os.str();
}

std::string selection_csv(const MesoSelection& sel, const std::string& digest) {
    std::ostringstream os;
    os << "fraction,rate,n_nodes,informativeness,compression,objective,failed,selected,note,config_digest\n";
    for (const auto& c : sel.candidates)
        os << num(c.fraction) << "," << num(c.rate) << "," << c.n_nodes << "," << num(c.informativeness) << ","
           << num(c.compression) << "," << num(c.objective) << "," << (c.failed ? 1 : 0) << ","
           << (c.fraction == sel.fraction ? 1 : 0) << "," << c.note << "," << digest << "\n";
    return os.str();
}

std::string traces_csv(const std::vector<std::pair<std::string, TrainTrace>>& traces) {
    std::ostringstream os;
    os << "phase,epoch,loss\n";
    for (const auto& [phase, tr] : traces)
        for (size_t e = 0; e < tr.loss.size(); ++e) os << phase << "," << e << "," << num(tr.loss[e]) << "\n";
    return os.str();
}

int cmd_condense(const Flags& f, std::ostream& out) {
    const CondenseConfig cfg = resolve_config(f);
    const Graph g = load_dataset_for(cfg);
    const CondenseOutput res = run_strategy(g, cfg);
    const fs::path dir = f.out;
    fs::create_directories(dir);
    const std::string digest = config_digest(cfg);

    json manifest = {{"strategy", cfg.strategy}, {"config_digest", digest}, {"families", json::array()}};
    for (size_t i = 0; i < res.families.size(); ++i) {
        const ScaleFamily& fam = res.families[i];
        const std::string sub = cfg.strategy == "recondense" ? scale_dir(fam.max_rate) : ".";
        save_family(fam, dir / sub);
        save_optimizer_state(res.optimizers.at(i), dir / sub / "optimizer.bin");
        manifest["families"].push_back({{"dir", sub}, {"max_rate", fam.max_rate}, {"nodes", fam.large.n_nodes}});
    }
    write_text(dir / "manifest.json", manifest.dump(2) + "\n");
    write_text(dir / "config.json", to_json(cfg).dump(2) + "\n");
    write_text(dir / "timings.csv", timings_csv(res.timings));
    write_text(dir / "traces.csv", traces_csv(res.traces));
    if (!res.selection.candidates.empty()) write_text(dir / "selection.csv", selection_csv(res.selection, digest));

    out << "strategy " << cfg.strategy << ", config " << digest << "\n";
    for (const auto& fam : res.families)
        out << "  family max_rate " << fam.max_rate << ": " << fam.large.n_nodes << " nodes (meso " << fam.meso.n_nodes
            << ")\n";
    for (const auto& t : res.timings) out << "  " << t.phase << " " << std::fixed << std::setprecision(2) << t.seconds << " s\n";
    out.unsetf(std::ios::floatfield);
    out << "wrote " << dir.string() << "\n";
    return 0;
}

std::vector<std::pair<std::string, double>> read_timings(const fs::path& file) {
    std::vector<std::pair<std::string, double>> rows;
    if (!fs::exists(file)) return rows;
    std::istringstream in(read_text(file));
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) {
        auto comma = line.find(',');
        if (comma == std::string::npos) continue;
        try {
            rows.emplace_back(line.substr(0, comma), std::stod(line.substr(comma + 1)));
        } catch (const std::logic_error&) {
            throw ValidationError(file.string() + ": malformed line '" + line + "'");
        }
    }
    return rows;
}

int cmd_evaluate(const Flags& f, std::ostream& out) {
    const CondenseConfig cfg = resolve_config(f);
    const Graph g = load_dataset_for(cfg);
    const fs::path dir = f.out;
    if (f.whole) {
        EvalReport rep;
        rep.dataset = dataset_name(cfg);
        rep.strategy = "whole";
        rep.mode = "full_graph";
        rep.ib_on = false;
        rep.config_digest = config_digest(cfg);
        for (const auto& a : cfg.eval.archs) rep.cells.push_back(evaluate_whole_graph(g, a, cfg.eval, cfg.seed));
        write_text(dir / "whole.csv", rep.to_csv());
        write_text(dir / "whole.md", rep.to_markdown());
        out << rep.to_markdown();
        return 0;
    }
    if (f.family.empty()) throw ParameterError("evaluate: --family is required");
    const FamilySet set = load_family_set(f.family);
    const std::vector<double> scales = f.scales.empty() ? cfg.scales : f.scales;
    EvalReport rep = evaluate_families(set, g, scales, cfg.eval, cfg.seed);
    rep.dataset = dataset_name(cfg);
    rep.ib_on = cfg.beta_ib > 0;
    rep.phase_seconds = read_timings(fs::path(f.family) / "timings.csv");
    write_text(dir / "report.csv", rep.to_csv());
    write_text(dir / "report.md", rep.to_markdown());
    out << rep.to_markdown();
    return 0;
}

int cmd_mi(const Flags& f, std::ostream& out) {
    const CondenseConfig cfg = resolve_config(f);
    if (f.family.empty()) throw ParameterError("mi: --family is required");
    const Graph g = load_dataset_for(cfg);
    const FamilySet set = load_family_set(f.family);
    const std::vector<double> scales = f.scales.empty() ? cfg.scales : f.scales;
    const ExtractMode mode = parse_extract_mode(cfg.eval.mode);
    std::vector<MiRow> rows;
    for (double s : scales) {
        auto r = mi_diagnostics(set.for_rate(s), g, {s}, mode, cfg.seed);
        rows.insert(rows.end(), r.begin(), r.end());
    }
    const std::string csv = mi_to_csv(rows, set.families.front().config_digest);
    write_text(fs::path(f.out) / "mi.csv", csv);
    out << csv;
    return 0;
}

int cmd_gradcheck(const Flags& f, std::ostream& out, std::ostream& err) {
    GradCheckOptions opts;
    opts.inject_fault = f.inject_fault;
    const GradCheckReport rep = run_gradcheck(f.seed, opts);
    if (f.out != ".") write_text(fs::path(f.out) / "gradcheck.csv", rep.to_csv());
    out << std::left << std::setw(8) << "suite" << std::setw(14) << "name" << std::setw(10) << "eps"
        << "max_rel_error\n";
    for (const auto& r : rep.rows)
        out << std::setw(8) << r.suite << std::setw(14) << r.name << std::setw(10) << r.eps << std::scientific
            << std::setprecision(3) << r.max_rel_error << std::defaultfloat << "\n";
    out << std::right;
    for (double e : opts.eps) out << "worst at eps " << e << ": " << rep.worst_at(e) << "\n";
    if (!rep.passed()) {
        err << "gradcheck FAILED:";
        for (const auto& n : rep.failures) err << " " << n;
        err << "\n";
        return 3;
    }
    out << "gradcheck passed (tolerance " << opts.tolerance << " at eps " << opts.pass_eps << ")\n";
    return 0;
}

int cmd_select_meso(const Flags& f, std::ostream& out) {
    const CondenseConfig cfg = resolve_config(f);
    const Graph g = load_dataset_for(cfg);
    const CondenseContext ctx = make_context(g, cfg);
    ProbeOptions probe;
    probe.epochs = cfg.probe_epochs;
    const MesoSelection sel = select_meso(ctx, cfg, cfg.meso_candidates, cfg.beta_ib, probe);
    const std::string csv = selection_csv(sel, config_digest(cfg));
    write_text(fs::path(f.out) / "selection.csv", csv);
    out << csv << "selected fraction " << sel.fraction << " (rate " << sel.rate << ")\n";
    return 0;
}

int cmd_report(const Flags& f, std::ostream& out) {
    if (f.reports.empty()) throw ParameterError("report: give at least one report.csv");
    std::ostringstream md;
    for (size_t i = 0; i < f.reports.size(); ++i) {
        EvalReport rep = report_from_csv(read_text(f.reports[i]));
        if (!f.timings.empty()) rep.phase_seconds = read_timings(f.timings);
        if (i) md << "\n";
        md << rep.to_markdown();
    }
    if (f.out != ".") write_text(fs::path(f.out) / "report.md", md.str());
    out << md.str();
    return 0;
}

void apply_thread_cap() {
    const char* env = std::getenv("BIMSGC_THREADS");
    if (!env || !*env) return;
    char* end = nullptr;
    long n = std::strtol(env, &end, 10);
    if (*end != '\0' || n < 1) throw ParameterError("BIMSGC_THREADS: expected a positive integer, got '" + std::string(env) + "'");
    omp_set_num_threads(static_cast<int>(n));
}

int exit_code(ErrorKind k) {
    switch (k) {
        case ErrorKind::Config: return 2;
        case ErrorKind::Numeric: return 3;
        case ErrorKind::Io: return 4;
    }
    return 1;
}

}  // namespace

int cli_main(int argc, char** argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"multi-scale graph condensation"};
    app.require_subcommand(1);
    Flags f;

    auto config_flags = [&](CLI::App* sc, bool with_strategy) {
        sc->add_option("--config", f.config, "JSON config file")->check(CLI::ExistingFile);
        sc->add_option("--dataset", f.dataset, "dataset directory (overrides the config)");
        sc->add_option("--out", f.out, "output directory");
        f.seed_opts.push_back(sc->add_option("--seed", f.seed, "random seed"));
        if (with_strategy)
            sc->add_option("--strategy", f.strategy, "bimsgc|recondense|large_to_small|small_to_large")
                ->check(CLI::IsMember({"bimsgc", "recondense", "large_to_small", "small_to_large"}));
    };
    auto eval_flags = [&](CLI::App* sc) {
        sc->add_option("--family", f.family, "condense output directory");
        sc->add_option("--trials", f.trials, "trials per cell")->check(CLI::PositiveNumber);
        sc->add_option("--mode", f.mode, "ranked|random")->check(CLI::IsMember({"ranked", "random"}));
        sc->add_option("--scales", f.scales, "reduction rates")->delimiter(',');
        sc->add_option("--archs", f.archs, "gcn,sgc,mlp,appnp,chebnet or all")->delimiter(',');
        sc->add_flag("--full-epochs", f.full_epochs, "2000 epochs, no early stopping");
    };

    auto* condense = app.add_subcommand("condense", "condense a dataset into a multi-scale family");
    config_flags(condense, true);
    auto* evaluate = app.add_subcommand("evaluate", "train GNNs on condensed graphs, test on the original");
    config_flags(evaluate, true);
    eval_flags(evaluate);
    evaluate->add_flag("--whole", f.whole, "train on the original training split instead");
    auto* mi = app.add_subcommand("mi", "mutual-information diagnostics per scale");
    config_flags(mi, false);
    eval_flags(mi);
    auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference check of every analytic gradient");
    gradcheck->add_option("--seed", f.seed, "random seed");
    gradcheck->add_option("--out", f.out, "write gradcheck.csv here");
    gradcheck->add_option("--inject-fault", f.inject_fault, "flip the gradient sign of one loss or architecture");
    auto* select = app.add_subcommand("select-meso", "score meso-scale candidates");
    config_flags(select, false);
    auto* report = app.add_subcommand("report", "markdown tables from report CSVs");
    report->add_option("reports", f.reports, "report.csv files")->required()->check(CLI::ExistingFile);
    report->add_option("--timings", f.timings, "timings.csv to append")->check(CLI::ExistingFile);
    report->add_option("--out", f.out, "write report.md here");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e, out, err);
        return code == 0 ? 0 : 2;
    }

    try {
        apply_thread_cap();
        if (*condense) return cmd_condense(f, out);
        if (*evaluate) return cmd_evaluate(f, out);
        if (*mi) return cmd_mi(f, out);
        if (*gradcheck) return cmd_gradcheck(f, out, err);
        if (*select) return cmd_select_meso(f, out);
        if (*report) return cmd_report(f, out);
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return exit_code(e.kind());
    } catch (const fs::filesystem_error& e) {
        err << "error: " << e.what() << "\n";
        return 4;
    } catch (const json::exception& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}

}  // namespace bimsgc
