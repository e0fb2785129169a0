// stg: command-line front end tying ingest, validation, augmentation,
// alignment, centroid derivation, repair, synthetic studies, statistics and
// subgraph mining into seeded, manifest-tracked pipelines.

#include <CLI11.hpp>

#include <chrono>
#include <filesystem>
#include <iostream>
#include <thread>

#include "stg/align.hpp"
#include "stg/augment.hpp"
#include "stg/centroid.hpp"
#include "stg/ingest.hpp"
#include "stg/json_io.hpp"
#include "stg/manifest.hpp"
#include "stg/mine.hpp"
#include "stg/repair.hpp"
#include "stg/stats.hpp"
#include "stg/synth.hpp"
#include "stg/validate.hpp"

namespace fs = std::filesystem;
using namespace stg;

namespace {

struct Shell {
    uint64_t seed = 0;
    int workers = std::max(1u, std::thread::hardware_concurrency());
    std::string solver;
    std::string out;
    std::string manifest_path;
    RunManifest manifest;

    json load(const std::string& path) {
        manifest.add_input(path);
        return load_json_file(path);
    }

    AugmentedGraph load_augmented(const std::string& path) {
        json j = load(path);
        if (j.value("type", "") == "augmented") return augmented_from_json(j);
        return augment(stg_from_json(j));
    }

    void write_text(const std::string& path, const std::string& text) {
        write_text_file(path, text);
        manifest.outputs.push_back(path);
    }

    void write_json(const std::string& path, const json& j) {
        write_json_file(path, j);
        manifest.outputs.push_back(path);
    }

    std::string require_out(const char* what) {
        if (out.empty()) throw ConfigError(std::string("--out is required for ") + what);
        return out;
    }

    void flush_manifest() {
        std::string path = manifest_path;
        if (path.empty()) {
            if (!out.empty() && fs::is_directory(out))
                path = (fs::path(out) / "manifest.json").string();
            else if (!out.empty())
                path = out + ".manifest.json";
            else
                path = "manifest.json";
        }
        write_json_file(path, manifest.to_json());
    }
};

std::vector<std::string> sorted_json_files(const std::string& dir) {
    if (!fs::is_directory(dir)) throw InputError("not a directory: " + dir);
    std::vector<std::string> files;
    for (const auto& e : fs::directory_iterator(dir))
        if (e.is_regular_file() && e.path().extension() == ".json" &&
            e.path().filename() != "manifest.json" &&
            e.path().filename() != "scripts.json")
            files.push_back(e.path().string());
    std::sort(files.begin(), files.end());
    if (files.empty()) throw InputError("no .json graphs in " + dir);
    return files;
}

AnnealSchedule make_sched(int steps, double tmax, double tmin, uint64_t seed) {
    AnnealSchedule s{steps, tmax, tmin, seed};
    s.check();
    return s;
}

std::string fmt(double v) {
    std::ostringstream os;
    os << std::setprecision(std::numeric_limits<double>::max_digits10) << v;
    return os.str();
}

void cmd_ingest(Shell& sh, const std::string& record_path, std::vector<std::string> levels) {
    json record = sh.load(record_path);
    std::set<LevelKind> kinds;
    if (levels.empty()) {
        if (!record.contains("levels")) throw InputError("record has no \"levels\" object");
        for (int i = 0; i < kLevelKindCount; ++i) {
            auto k = static_cast<LevelKind>(i);
            if (record["levels"].contains(level_name(k))) kinds.insert(k);
        }
    } else {
        for (const auto& name : levels) {
            auto k = level_from_name(name);
            if (!k) throw ConfigError("unknown level: " + name);
            kinds.insert(*k);
        }
    }
    auto g = ingest(record, kinds);
    auto rep = validate_stg(g);
    if (!rep.ok()) throw InputError("ingested graph fails validation:\n" + rep.to_string());
    sh.write_json(sh.require_out("ingest"), stg_to_json(g));
}

void cmd_validate(Shell& sh, const std::string& path) {
    json j = sh.load(path);
    ValidationReport rep = j.value("type", "") == "augmented"
                               ? validate_augmented(augmented_from_json(j))
                               : validate_stg(stg_from_json(j));
    if (rep.ok()) {
        std::cout << "valid\n";
        return;
    }
    std::cout << rep.to_string();
    throw InputError("graph has " + std::to_string(rep.violations.size()) + " violation(s)");
}

void cmd_augment(Shell& sh, const std::string& path, const std::string& dot_path) {
    auto a = augment(stg_from_json(sh.load(path)));
    sh.write_json(sh.require_out("augment"), augmented_to_json(a));
    if (!dot_path.empty()) sh.write_text(dot_path, augmented_to_dot(a));
}

void cmd_compress(Shell& sh, const std::string& path) {
    auto a = augmented_from_json(sh.load(path));
    sh.write_json(sh.require_out("compress"), stg_to_json(compress(a)));
}

void cmd_distance(Shell& sh, const std::string& pa, const std::string& pb, int steps,
                  double tmax, double tmin, bool exact, const std::string& perm_out) {
    auto a = sh.load_augmented(pa);
    auto b = sh.load_augmented(pb);
    auto [ma, mb] = to_padded_pair(a, b);
    Alignment al = exact ? exhaustive_align(ma, mb)
                         : align(ma, mb, make_sched(steps, tmax, tmin, sh.seed));
    std::cout << fmt(al.energy) << "\n";
    sh.manifest.config["distance"] = fmt(al.energy);
    if (!sh.out.empty())
        sh.write_json(sh.out, json{{"distance", al.energy},
                                   {"energy_sq", al.energy_sq},
                                   {"exact", exact}});
    if (!perm_out.empty()) sh.write_json(perm_out, json(al.perm));
}

void cmd_distance_matrix(Shell& sh, const std::string& dir, int steps, double tmax,
                         double tmin) {
    auto files = sorted_json_files(dir);
    std::vector<AugmentedGraph> graphs;
    DistanceMatrix m;
    for (const auto& f : files) {
        graphs.push_back(sh.load_augmented(f));
        m.labels.push_back(fs::path(f).stem().string());
    }
    std::vector<const AugmentedGraph*> ptrs;
    for (const auto& g : graphs) ptrs.push_back(&g);
    auto mats = build_matrices(ptrs);

    const int n = static_cast<int>(mats.size());
    m.values.assign(n, std::vector<double>(n, 0.0));
    std::vector<std::pair<int, int>> pairs;
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) pairs.push_back({i, j});
    parallel_for(static_cast<int>(pairs.size()), sh.workers, [&](int t) {
        auto [i, j] = pairs[t];
        auto sched = make_sched(steps, tmax, tmin, sub_seed(sh.seed, 0xd157, t));
        double d = align(mats[i], mats[j], sched).energy;
        m.values[i][j] = m.values[j][i] = d;
    });
    m.check();
    if (sh.out.empty())
        std::cout << matrix_to_csv(m);
    else
        sh.write_text(sh.out, matrix_to_csv(m));
}

void cmd_centroid(Shell& sh, const std::string& dir, CentroidConfig cfg,
                  const std::string& trace_path) {
    auto files = sorted_json_files(dir);
    std::vector<AugmentedGraph> graphs;
    for (const auto& f : files) graphs.push_back(sh.load_augmented(f));
    std::vector<const AugmentedGraph*> ptrs;
    for (const auto& g : graphs) ptrs.push_back(&g);
    auto mats = build_matrices(ptrs);

    cfg.outer.seed = sh.seed;
    cfg.workers = sh.workers;
    auto res = derive_centroid(mats, cfg);
    sh.manifest.config["best_loss"] = fmt(res.best_loss);
    sh.manifest.config["naive_index"] = std::to_string(res.naive_index);
    sh.write_json(sh.require_out("centroid"),
                  augmented_to_json(matrix_to_augmented(res.best_candidate)));
    if (!trace_path.empty()) {
        std::ostringstream os;
        os << "step,best_loss\n";
        for (size_t i = 0; i < res.loss_trace.size(); ++i)
            os << i << "," << fmt(res.loss_trace[i]) << "\n";
        sh.write_text(trace_path, os.str());
    }
    std::cout << "best_loss " << fmt(res.best_loss) << " naive_index " << res.naive_index
              << (res.early_stop ? " (early stop)" : "") << "\n";
}

void cmd_repair(Shell& sh, const std::string& path, double timeout,
                const std::string& debug_dir) {
    if (!sh.solver.empty() && !fs::exists(sh.solver))
        throw ConfigError("solver binary not found: " + sh.solver);
    auto a = augmented_from_json(sh.load(path));
    auto m = build_matrices({&a})[0];
    RepairOptions opt;
    opt.timeout_per_partition = timeout;
    opt.solver_path = sh.solver;
    opt.debug_dir = debug_dir;
    opt.workers = sh.workers;
    auto res = repair(m, opt);
    sh.manifest.config["objective"] = std::to_string(res.objective);
    for (const auto& st : res.stats)
        std::cout << st.name << " flips=" << st.flips << (st.optimal ? "" : " (heuristic)")
                  << (st.timeout_hit ? " (timeout)" : "") << "\n";
    std::cout << "objective " << res.objective << "\n";
    sh.write_json(sh.require_out("repair"), augmented_to_json(matrix_to_augmented(res.matrix)));
}

void cmd_synth(Shell& sh, const std::string& base_path, int k, EditOptions opt) {
    auto a = sh.load_augmented(base_path);
    auto base = build_matrices({&a})[0];
    auto corpus = build_corpus(base, k, sh.seed, opt, sh.workers);

    std::string dir = sh.require_out("synth");
    fs::create_directories(dir);
    json scripts = json::array();
    for (int v = 0; v < k; ++v) {
        char name[32];
        std::snprintf(name, sizeof name, "variant_%03d.json", v);
        sh.write_json((fs::path(dir) / name).string(),
                      augmented_to_json(matrix_to_augmented(corpus.variants[v])));
        json cells = json::array();
        for (auto [i, j] : corpus.scripts[v].cells) cells.push_back({i, j});
        scripts.push_back({{"variant", name}, {"cells", cells}});
    }
    sh.write_json((fs::path(dir) / "scripts.json").string(),
                  json{{"edits_per_variant", corpus.edits_per_variant},
                       {"seed", corpus.seed},
                       {"scripts", scripts}});
    std::cout << "k " << k << " edits_per_variant " << corpus.edits_per_variant << "\n";
}

void cmd_study_dist(Shell& sh, const std::string& bases_dir, std::vector<double> p_grid,
                    int steps, double tmax, double tmin, bool verify_exact) {
    auto files = sorted_json_files(bases_dir);
    std::vector<AugmentedGraph> graphs;
    for (const auto& f : files) graphs.push_back(sh.load_augmented(f));
    std::vector<PaddedMatrix> bases;
    for (const auto& g : graphs) bases.push_back(build_matrices({&g})[0]);
    EditOptions opt;
    opt.verify_exact = verify_exact;
    auto rows = relative_error_study(bases, p_grid, make_sched(steps, tmax, tmin, 0), sh.seed,
                                     opt, sh.workers);
    auto csv = dist_error_csv(rows);
    if (sh.out.empty())
        std::cout << csv;
    else
        sh.write_text(sh.out, csv);
}

void cmd_study_centroid(Shell& sh, const std::string& base_path, std::vector<int> ks,
                        CentroidStudyOptions opt) {
    auto a = sh.load_augmented(base_path);
    auto base = build_matrices({&a})[0];
    opt.centroid.workers = sh.workers;
    opt.repair.workers = sh.workers;
    auto rows = centroid_error_study(base, ks, sh.seed, opt);
    auto csv = centroid_error_csv(rows);
    if (sh.out.empty())
        std::cout << csv;
    else
        sh.write_text(sh.out, csv);
}

void cmd_mantel(Shell& sh, const std::string& pa, const std::string& pb, int perms) {
    sh.manifest.add_input(pa);
    sh.manifest.add_input(pb);
    std::ifstream fa(pa), fb(pb);
    if (!fa) throw InputError("cannot open " + pa);
    if (!fb) throw InputError("cannot open " + pb);
    std::stringstream ba, bb;
    ba << fa.rdbuf();
    bb << fb.rdbuf();
    auto r = mantel_spearman(matrix_from_csv(ba.str()), matrix_from_csv(bb.str()), perms,
                             sh.seed, sh.workers);
    std::cout << "rho " << fmt(r.rho) << " p " << fmt(r.p_value) << "\n";
    if (!sh.out.empty())
        sh.write_json(sh.out, json{{"rho", r.rho}, {"p_value", r.p_value}, {"perms", perms}});
}

void cmd_mine(Shell& sh, const std::string& dir, int size, const std::string& centroid_path,
              int samples) {
    auto files = sorted_json_files(dir);
    std::vector<AugmentedGraph> corpus;
    for (const auto& f : files) corpus.push_back(sh.load_augmented(f));
    MineOptions opt;
    opt.workers = sh.workers;
    auto common = common_subgraphs(corpus, size, opt);

    json report;
    report["size"] = size;
    report["common_count"] = common.size();
    json dots = json::array();
    int emitted = 0;
    for (const auto& s : common) {
        if (emitted >= samples) break;
        dots.push_back(subgraph_dot(s, "s" + std::to_string(emitted)));
        ++emitted;
    }
    report["samples_dot"] = dots;
    if (!centroid_path.empty()) {
        auto centroid = sh.load_augmented(centroid_path);
        auto r = containment_rate(common, centroid);
        report["containment"] = {{"percent", r.percent},
                                 {"contained", r.contained},
                                 {"total", r.total},
                                 {"vacuous", r.vacuous}};
        std::cout << "common " << common.size() << " containment " << fmt(r.percent) << "%"
                  << (r.vacuous ? " (vacuous)" : "") << "\n";
    } else {
        std::cout << "common " << common.size() << "\n";
    }
    if (!sh.out.empty()) sh.write_json(sh.out, report);
}

}  // namespace

int main(int argc, char** argv) {
    Shell sh;
    CLI::App app{"structural temporal graph toolkit"};
    app.require_subcommand(1);
    app.set_config("--config");
    app.add_option("--seed", sh.seed, "master RNG seed")->capture_default_str();
    app.add_option("--workers", sh.workers, "worker thread bound")->capture_default_str();
    app.add_option("--solver", sh.solver, "external SMT optimization solver binary");
    app.add_option("--out", sh.out, "output file or directory");
    app.add_option("--manifest", sh.manifest_path, "run manifest path");

    // ingest
    std::string record_path;
    std::vector<std::string> levels;
    auto* c_ingest = app.add_subcommand("ingest", "build a graph from an analysis record");
    c_ingest->add_option("record", record_path, "analysis record JSON")->required();
    c_ingest->add_option("--levels", levels, "level kinds to include (default: all present)");

    // validate
    std::string val_path;
    auto* c_validate = app.add_subcommand("validate", "check structural rules");
    c_validate->add_option("graph", val_path, "graph JSON (compressed or augmented)")->required();

    // augment
    std::string aug_path, dot_path;
    auto* c_augment = app.add_subcommand("augment", "add prototypes and chains");
    c_augment->add_option("graph", aug_path, "compressed graph JSON")->required();
    c_augment->add_option("--dot", dot_path, "also write a DOT rendering");

    // compress
    std::string comp_path;
    auto* c_compress = app.add_subcommand("compress", "strip prototypes and chains");
    c_compress->add_option("graph", comp_path, "augmented graph JSON")->required();

    // distance
    std::string da, db, perm_out;
    int steps = 2000;
    double tmax = 2.0, tmin = 0.01;
    bool exact = false;
    auto* c_distance = app.add_subcommand("distance", "structural distance between two graphs");
    c_distance->add_option("a", da)->required();
    c_distance->add_option("b", db)->required();
    c_distance->add_option("--steps", steps)->capture_default_str();
    c_distance->add_option("--tmax", tmax)->capture_default_str();
    c_distance->add_option("--tmin", tmin)->capture_default_str();
    c_distance->add_flag("--exact", exact, "exact branch-and-bound alignment");
    c_distance->add_option("--perm-out", perm_out, "write the aligning permutation");

    // distance-matrix
    std::string dm_dir;
    auto* c_dmatrix = app.add_subcommand("distance-matrix", "pairwise distances for a corpus");
    c_dmatrix->add_option("dir", dm_dir, "directory of graph JSONs")->required();
    c_dmatrix->add_option("--steps", steps)->capture_default_str();
    c_dmatrix->add_option("--tmax", tmax)->capture_default_str();
    c_dmatrix->add_option("--tmin", tmin)->capture_default_str();

    // centroid
    std::string cen_dir, trace_path;
    CentroidConfig ccfg;
    auto* c_centroid = app.add_subcommand("centroid", "derive an approximate centroid");
    c_centroid->add_option("dir", cen_dir, "directory of corpus graph JSONs")->required();
    c_centroid->add_option("--outer-steps", ccfg.outer.steps)->capture_default_str();
    c_centroid->add_option("--outer-tmax", ccfg.outer.t_max)->capture_default_str();
    c_centroid->add_option("--outer-tmin", ccfg.outer.t_min)->capture_default_str();
    c_centroid->add_option("--nested-t-initial-max", ccfg.nested.t_initial_max)
        ->capture_default_str();
    c_centroid->add_option("--nested-t-final-max", ccfg.nested.t_final_max)
        ->capture_default_str();
    c_centroid->add_option("--nested-s-initial", ccfg.nested.s_initial)->capture_default_str();
    c_centroid->add_option("--nested-s-final", ccfg.nested.s_final)->capture_default_str();
    c_centroid->add_option("--trace", trace_path, "loss trace CSV");

    // repair
    std::string rep_path, debug_dir;
    double timeout = 300.0;
    auto* c_repair = app.add_subcommand("repair", "project onto the nearest valid graph");
    c_repair->add_option("approx", rep_path, "approximate centroid JSON")->required();
    c_repair->add_option("--timeout", timeout, "seconds per partition")->capture_default_str();
    c_repair->add_option("--debug-dir", debug_dir, "dump emitted solver scripts");

    // synth
    std::string base_path;
    int k = 3;
    EditOptions eopt;
    bool verify_exact = false, verify_centroid = false;
    auto* c_synth = app.add_subcommand("synth", "synthetic corpus around a base graph");
    c_synth->add_option("--base", base_path, "base graph JSON")->required();
    c_synth->add_option("--k", k, "corpus size")->capture_default_str();
    c_synth->add_flag("--verify-exact", verify_exact,
                      "re-sample scripts until the exact distance is sqrt(n)");
    c_synth->add_flag("--verify-centroid", verify_centroid,
                      "admit members only while the base stays the provable centroid");

    // study
    auto* c_study = app.add_subcommand("study", "synthetic evaluation studies");
    c_study->require_subcommand(1);
    std::string bases_dir;
    std::vector<double> p_grid{0.1, 0.2, 0.3, 0.5, 1.0};
    auto* c_sdist = c_study->add_subcommand("dist-error", "annealed distance relative error");
    c_sdist->add_option("--bases", bases_dir, "directory of base graph JSONs")->required();
    c_sdist->add_option("--p", p_grid, "edit fractions of |E|")->capture_default_str();
    c_sdist->add_option("--steps", steps)->capture_default_str();
    c_sdist->add_option("--tmax", tmax)->capture_default_str();
    c_sdist->add_option("--tmin", tmin)->capture_default_str();
    c_sdist->add_flag("--verify-exact", verify_exact);

    std::vector<int> k_range{3, 5, 8};
    CentroidStudyOptions sopt;
    bool exhaustive_loss = false;
    auto* c_scen = c_study->add_subcommand("centroid-error", "derived centroid relative error");
    c_scen->add_option("--base", base_path, "base graph JSON")->required();
    c_scen->add_option("--k", k_range, "corpus sizes")->capture_default_str();
    c_scen->add_option("--outer-steps", sopt.centroid.outer.steps)->capture_default_str();
    c_scen->add_option("--outer-tmax", sopt.centroid.outer.t_max)->capture_default_str();
    c_scen->add_option("--outer-tmin", sopt.centroid.outer.t_min)->capture_default_str();
    c_scen->add_flag("--exhaustive-loss", exhaustive_loss, "exact alignment for losses");
    c_scen->add_flag("--verify-exact", verify_exact);
    c_scen->add_flag("--verify-centroid", verify_centroid);

    // mantel
    std::string ma, mb;
    int perms = 9999;
    auto* c_mantel = app.add_subcommand("mantel", "Mantel test with Spearman correlation");
    c_mantel->add_option("a", ma, "distance matrix CSV")->required();
    c_mantel->add_option("b", mb, "distance matrix CSV")->required();
    c_mantel->add_option("--perms", perms)->capture_default_str();

    // mine
    std::string mine_dir, centroid_path;
    int size = 5, samples = 5;
    auto* c_mine = app.add_subcommand("mine", "common connected subgraphs of a corpus");
    c_mine->add_option("dir", mine_dir, "directory of corpus graph JSONs")->required();
    c_mine->add_option("--size", size, "subgraph node count (2..5)")->capture_default_str();
    c_mine->add_option("--centroid", centroid_path, "centroid to score containment against");
    c_mine->add_option("--samples", samples, "DOT samples in the report")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    sh.manifest.argv.assign(argv, argv + argc);
    sh.manifest.seed = sh.seed;
    sh.manifest.workers = sh.workers;
    sh.manifest.started_at = iso_timestamp_now();
    auto t0 = std::chrono::steady_clock::now();

    try {
        if (*c_ingest) {
            sh.manifest.command = "ingest";
            cmd_ingest(sh, record_path, levels);
        } else if (*c_validate) {
            sh.manifest.command = "validate";
            cmd_validate(sh, val_path);
        } else if (*c_augment) {
            sh.manifest.command = "augment";
            cmd_augment(sh, aug_path, dot_path);
        } else if (*c_compress) {
            sh.manifest.command = "compress";
            cmd_compress(sh, comp_path);
        } else if (*c_distance) {
            sh.manifest.command = "distance";
            cmd_distance(sh, da, db, steps, tmax, tmin, exact, perm_out);
        } else if (*c_dmatrix) {
            sh.manifest.command = "distance-matrix";
            cmd_distance_matrix(sh, dm_dir, steps, tmax, tmin);
        } else if (*c_centroid) {
            sh.manifest.command = "centroid";
            cmd_centroid(sh, cen_dir, ccfg, trace_path);
        } else if (*c_repair) {
            sh.manifest.command = "repair";
            cmd_repair(sh, rep_path, timeout, debug_dir);
        } else if (*c_synth) {
            sh.manifest.command = "synth";
            eopt.verify_exact = verify_exact;
            eopt.verify_centroid = verify_centroid;
            cmd_synth(sh, base_path, k, eopt);
        } else if (*c_sdist) {
            sh.manifest.command = "study dist-error";
            cmd_study_dist(sh, bases_dir, p_grid, steps, tmax, tmin, verify_exact);
        } else if (*c_scen) {
            sh.manifest.command = "study centroid-error";
            sopt.exhaustive_loss = exhaustive_loss;
            sopt.edits.verify_exact = verify_exact;
            sopt.edits.verify_centroid = verify_centroid;
            cmd_study_centroid(sh, base_path, k_range, sopt);
        } else if (*c_mantel) {
            sh.manifest.command = "mantel";
            cmd_mantel(sh, ma, mb, perms);
        } else if (*c_mine) {
            sh.manifest.command = "mine";
            cmd_mine(sh, mine_dir, size, centroid_path, samples);
        }
        sh.manifest.wall_seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        sh.flush_manifest();
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const InputError& e) {
        std::cerr << "input error: " << e.what() << "\n";
        return 3;
    } catch (const SolverError& e) {
        std::cerr << "solver error: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 5;
    }
    return 0;
}
