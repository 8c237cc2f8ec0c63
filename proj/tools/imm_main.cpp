// Command-line front end: train / sample / eval / verify.
// Exit codes: 0 success, 1 invalid arguments or config, 2 runtime fault
// (non-finite loss, unreadable checkpoint, I/O failure).

#include <CLI11.hpp>
#include <Eigen/Core>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "imm/checkpoint.hpp"
#include "imm/config.hpp"
#include "imm/data.hpp"
#include "imm/eval.hpp"
#include "imm/sampler.hpp"
#include "imm/train.hpp"
#include "imm/verify.hpp"

namespace {

using namespace imm;

std::string slurp(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DomainError("cannot open file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

DataFn dataset_fn(const ToyDataset& ds) {
    return [ds](Rng& rng, int n, Mat& X, std::vector<int>& labels) { sample_dataset(ds, n, rng, X, labels); };
}

int cmd_train(const std::string& config_path) {
    RunConfig rc = parse_config(slurp(config_path));
    if (const char* env = std::getenv("IMM_OUT_DIR")) rc.out_dir = env;
    validate_config(rc);
    std::filesystem::create_directories(rc.out_dir);
    const std::string canon = serialize_config(rc);

    ToyDataset ds = make_dataset(rc.data, rc.sched.sigma_d);
    MlpConfig mc;
    mc.n_classes = ds.n_classes;
    TrainState st = make_train_state(mc, rc.train, rc.seed);
    LossConfig lcfg{rc.sched, rc.head, rc.kernel, rc.weight};

    std::ofstream metrics(rc.out_dir + "/metrics.txt", std::ios::trunc);
    if (!metrics) throw RuntimeFault("cannot open metrics log in " + rc.out_dir);

    EvalFn eval_fn;
    if (rc.train.eval_every > 0) {
        const auto times = schedule_times(rc.sampler, rc.sched);
        eval_fn = [&, times](std::int64_t step) -> std::pair<double, double> {
            Mlp ema_net = with_params(st.net, st.ema.shadow);
            Rng er = Rng::stream(rc.seed, {0xE7A1, static_cast<std::uint64_t>(step)});
            const int n = 512;
            std::vector<int> labels(n);
            for (int i = 0; i < n; ++i) labels[i] = er.uniform_int(ds.n_classes);
            OneStepMap map = model_map(rc.head, rc.sched, ema_net, labels, 1.0);
            Mat gen = pushforward_sample(map, times, rc.sched, n, 2, er);
            Mat Xref;
            std::vector<int> lref;
            sample_dataset(ds, n, er, Xref, lref);
            return {two_sample_mmd(gen, Xref), sliced_w1(gen, Xref, 32, er)};
        };
    }

    std::function<void(std::int64_t)> on_step;
    if (rc.train.ckpt_every > 0) {
        on_step = [&](std::int64_t step) {
            if (step % rc.train.ckpt_every == 0)
                save_checkpoint(rc.out_dir + "/ckpt_" + std::to_string(step) + ".imm", canon, st, rc.seed);
        };
    }

    TrainResult tr = train_loop(lcfg, rc.train, rc.mapping, dataset_fn(ds), rc.seed, st, &metrics, eval_fn, on_step);
    const std::string final_path = rc.out_dir + "/ckpt_final.imm";
    save_checkpoint(final_path, canon, st, rc.seed);
    if (tr.aborted) {
        std::cerr << "fault: " << tr.abort_reason << "; last good state saved to " << final_path << "\n";
        return 2;
    }
    std::cout << "trained " << tr.steps_done << " steps; checkpoint " << final_path << "\n";
    return 0;
}

int cmd_sample(const std::string& ckpt_path, int n, int steps, const std::string& engine,
               const std::string& schedule, double w, std::uint64_t seed, std::string out_path, bool uncond,
               bool raw_weights) {
    CheckpointFile file = load_checkpoint(ckpt_path);
    RunConfig rc = parse_config(file.config_text);
    if (const char* env = std::getenv("IMM_OUT_DIR")) rc.out_dir = env;
    require(n > 0, "sample: --n must be > 0");
    require(engine == "push" || engine == "restart", "sample: --sampler must be push or restart");
    require(!(uncond && w != 1.0), "sample: guidance (--w != 1) needs class labels; drop --uncond");

    ToyDataset ds = make_dataset(rc.data, rc.sched.sigma_d);
    MlpConfig mc;
    mc.n_classes = ds.n_classes;
    TrainState st = make_train_state(mc, rc.train, file.seed);
    apply_checkpoint(file, st);
    Mlp net = raw_weights ? st.net : with_params(st.net, st.ema.shadow);

    SamplerSchedule ss = rc.sampler;
    if (steps > 0) ss.n_steps = steps;
    if (schedule == "auto")
        ss.kind = (ss.n_steps == 2 ? GridKind::TwoStepEta : GridKind::Uniform);
    else
        ss.kind = grid_kind_from(schedule);

    Rng lrng = Rng::stream(seed, {0x5A3A, 1});
    std::vector<int> labels(n);
    for (int i = 0; i < n; ++i) labels[i] = uncond ? net.null_label() : lrng.uniform_int(ds.n_classes);

    Mat S;
    if (ss.force_unguided_last && w != 1.0) {
        // Per-sample path: the final hop drops guidance, so the batched
        // single-map engines do not apply.
        Rng rng = Rng::stream(seed, {0x5A3A, 2});
        S.resize(n, 2);
        for (int i = 0; i < n; ++i) {
            Vec v = (engine == "push") ? pushforward_sample(rc.head, rc.sched, net, ss, rng, labels[i], w)
                                       : restart_sample(rc.head, rc.sched, net, ss, rng, labels[i], w);
            S.row(i) = v.transpose();
        }
    } else {
        const auto times = schedule_times(ss, rc.sched);
        OneStepMap map = model_map(rc.head, rc.sched, net, labels, w);
        Rng rng = Rng::stream(seed, {0x5A3A, 2});
        S = (engine == "push") ? pushforward_sample(map, times, rc.sched, n, 2, rng)
                               : restart_sample(map, times, rc.sched, n, 2, rng);
    }

    if (out_path.empty()) out_path = rc.out_dir + "/samples.txt";
    if (auto dir = std::filesystem::path(out_path).parent_path(); !dir.empty())
        std::filesystem::create_directories(dir);
    write_samples(out_path, S, uncond ? nullptr : &labels);
    std::cout << "wrote " << n << " samples to " << out_path << "\n";
    return 0;
}

int cmd_eval(const std::string& samples_path, const std::string& dataset, double sigma_d, int n_ref,
             std::uint64_t seed) {
    require(n_ref > 1, "eval: --n-ref must be > 1");
    Mat gen;
    std::vector<int> gen_labels;
    read_samples(samples_path, gen, gen_labels);
    require(gen.cols() == 2, "eval: expected 2-D samples");
    require(gen.rows() > 1, "eval: need at least 2 samples");

    ToyDataset ds = make_dataset(dataset_kind_from(dataset), sigma_d);
    Rng rng = Rng::stream(seed, {0xEA1});
    Mat ref;
    std::vector<int> lref;
    sample_dataset(ds, n_ref, rng, ref, lref);
    Mat pool;
    sample_dataset(ds, 2 * 8 * n_ref, rng, pool, lref);

    EvalReport rep;
    rep.n_gen = static_cast<int>(gen.rows());
    rep.n_data = n_ref;
    rep.mmd2 = two_sample_mmd(gen, ref);
    rep.mmd2_baseline = mmd2_baseline(pool, n_ref, 8);
    rep.sliced_w1 = sliced_w1(gen, ref, 64, rng);
    if (ds.kind == DatasetKind::GaussRing8)
        rep.mode_counts = mode_coverage(gen, mode_centers(ds), coverage_radius(ds));
    else
        rep.mode_counts = {rep.n_gen};
    std::cout << serialize(rep);
    return 0;
}

int cmd_verify(const std::vector<std::string>& filters) {
    auto results = run_verify(filters);
    bool all = true;
    for (const auto& r : results) {
        std::printf("%s %-15s %8.2fs  %s\n", r.pass ? "PASS" : "FAIL", r.name.c_str(), r.seconds, r.detail.c_str());
        std::fflush(stdout);
        all = all && r.pass;
    }
    return all ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"One/few-step generative models on 2-D toy densities via moment matching"};
    app.require_subcommand(1);
    int threads = 1;
    app.add_option("--threads", threads, "Eigen thread count")->capture_default_str();

    std::string config_path;
    auto* train_cmd = app.add_subcommand("train", "Train a model from an INI config");
    train_cmd->add_option("config", config_path, "config file path")->required();

    std::string ckpt_path, out_path, engine = "push", schedule = "auto";
    int n_samples = 2000, steps = 0;
    double w = 1.0;
    std::uint64_t sample_seed = 1;
    bool uncond = false, raw_weights = false;
    auto* sample_cmd = app.add_subcommand("sample", "Draw samples from a checkpoint");
    sample_cmd->add_option("checkpoint", ckpt_path, "checkpoint file")->required();
    sample_cmd->add_option("--n", n_samples, "number of samples")->capture_default_str();
    sample_cmd->add_option("--steps", steps, "override the grid step count (0 = config value)")
        ->capture_default_str();
    sample_cmd->add_option("--sampler", engine, "push | restart")->capture_default_str();
    sample_cmd->add_option("--schedule", schedule, "auto | uniform | edm | two_step_eta")->capture_default_str();
    sample_cmd->add_option("--w", w, "guidance weight")->capture_default_str();
    sample_cmd->add_option("--seed", sample_seed, "sampling seed")->capture_default_str();
    sample_cmd->add_option("--out", out_path, "output file (default <out_dir>/samples.txt)");
    sample_cmd->add_flag("--uncond", uncond, "condition every sample on the null token");
    sample_cmd->add_flag("--raw-weights", raw_weights, "use raw weights instead of the EMA shadow");

    std::string samples_path, dataset = "gauss_ring8";
    double sigma_d = 0.5;
    int n_ref = 2000;
    std::uint64_t eval_seed = 1;
    auto* eval_cmd = app.add_subcommand("eval", "Score a sample file against a dataset");
    eval_cmd->add_option("samples", samples_path, "sample file")->required();
    eval_cmd->add_option("--dataset", dataset, "gauss_ring8 | checkerboard | two_moons")->capture_default_str();
    eval_cmd->add_option("--sigma-d", sigma_d, "dataset std")->capture_default_str();
    eval_cmd->add_option("--n-ref", n_ref, "reference draw count")->capture_default_str();
    eval_cmd->add_option("--seed", eval_seed, "reference seed")->capture_default_str();

    std::vector<std::string> filters;
    auto* verify_cmd = app.add_subcommand("verify", "Run the verification suites");
    verify_cmd->add_option("--filter", filters, "suite names to run (default: all)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 1;
    }

    Eigen::setNbThreads(threads);
    try {
        if (*train_cmd) return cmd_train(config_path);
        if (*sample_cmd)
            return cmd_sample(ckpt_path, n_samples, steps, engine, schedule, w, sample_seed, out_path, uncond,
                              raw_weights);
        if (*eval_cmd) return cmd_eval(samples_path, dataset, sigma_d, n_ref, eval_seed);
        return cmd_verify(filters);
    } catch (const DomainError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const RuntimeFault& e) {
        std::cerr << "fault: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "fault: " << e.what() << "\n";
        return 2;
    }
}
