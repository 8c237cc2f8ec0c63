#include "imm/config.hpp"

#include <charconv>
#include <cmath>
#include <sstream>

namespace imm {

namespace {

std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

double parse_double(const std::string& v, const std::string& where) {
    double out = 0.0;
    auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    require(ec == std::errc() && ptr == v.data() + v.size(), "config: bad number for " + where + ": '" + v + "'");
    return out;
}

// 'auto' stands for a NaN sentinel resolved later from the schedule.
double parse_double_or_auto(const std::string& v, const std::string& where) {
    if (v == "auto") return std::numeric_limits<double>::quiet_NaN();
    return parse_double(v, where);
}

std::int64_t parse_int(const std::string& v, const std::string& where) {
    std::int64_t out = 0;
    auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    require(ec == std::errc() && ptr == v.data() + v.size(), "config: bad integer for " + where + ": '" + v + "'");
    return out;
}

std::uint64_t parse_u64(const std::string& v, const std::string& where) {
    std::uint64_t out = 0;
    auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    require(ec == std::errc() && ptr == v.data() + v.size(),
            "config: bad unsigned integer for " + where + ": '" + v + "'");
    return out;
}

bool parse_bool(const std::string& v, const std::string& where) {
    if (v == "true") return true;
    if (v == "false") return false;
    throw DomainError("config: bad bool for " + where + ": '" + v + "' (use true/false)");
}

std::string fmt_or_auto(double v) {
    if (std::isnan(v)) return "auto";
    return fmt_double(v);
}

}  // namespace

std::string to_token(ScheduleKind k) { return k == ScheduleKind::OTFM ? "otfm" : "cosine"; }

std::string to_token(HeadKind k) {
    switch (k) {
        case HeadKind::Identity: return "identity";
        case HeadKind::SimpleEDM: return "simple_edm";
        case HeadKind::EulerFM: return "euler_fm";
    }
    throw DomainError("config: bad head kind");
}

std::string to_token(KernelKind k) {
    switch (k) {
        case KernelKind::Laplace: return "laplace";
        case KernelKind::RBF: return "rbf";
        case KernelKind::Energy: return "energy";
        case KernelKind::PseudoHuber: return "pseudo_huber";
    }
    throw DomainError("config: bad kernel kind");
}

std::string to_token(MappingKind k) {
    switch (k) {
        case MappingKind::EtaDecrement: return "eta_decrement";
        case MappingKind::TDecrement: return "t_decrement";
        case MappingKind::LambdaDecrement: return "lambda_decrement";
        case MappingKind::InvEtaIncrement: return "inv_eta_increment";
    }
    throw DomainError("config: bad mapping kind");
}

std::string to_token(WeightKind k) { return k == WeightKind::Elbo ? "elbo" : "uniform"; }

std::string to_token(GridKind k) {
    switch (k) {
        case GridKind::Uniform: return "uniform";
        case GridKind::EDM: return "edm";
        case GridKind::TwoStepEta: return "two_step_eta";
    }
    throw DomainError("config: bad grid kind");
}

std::string to_token(DatasetKind k) {
    switch (k) {
        case DatasetKind::GaussRing8: return "gauss_ring8";
        case DatasetKind::Checkerboard: return "checkerboard";
        case DatasetKind::TwoMoons: return "two_moons";
    }
    throw DomainError("config: bad dataset kind");
}

ScheduleKind schedule_kind_from(const std::string& s) {
    if (s == "otfm") return ScheduleKind::OTFM;
    if (s == "cosine") return ScheduleKind::Cosine;
    throw DomainError("config: unknown schedule kind '" + s + "'");
}

HeadKind head_kind_from(const std::string& s) {
    if (s == "identity") return HeadKind::Identity;
    if (s == "simple_edm") return HeadKind::SimpleEDM;
    if (s == "euler_fm") return HeadKind::EulerFM;
    throw DomainError("config: unknown head kind '" + s + "'");
}

KernelKind kernel_kind_from(const std::string& s) {
    if (s == "laplace") return KernelKind::Laplace;
    if (s == "rbf") return KernelKind::RBF;
    if (s == "energy") return KernelKind::Energy;
    if (s == "pseudo_huber") return KernelKind::PseudoHuber;
    throw DomainError("config: unknown kernel kind '" + s + "'");
}

MappingKind mapping_kind_from(const std::string& s) {
    if (s == "eta_decrement") return MappingKind::EtaDecrement;
    if (s == "t_decrement") return MappingKind::TDecrement;
    if (s == "lambda_decrement") return MappingKind::LambdaDecrement;
    if (s == "inv_eta_increment") return MappingKind::InvEtaIncrement;
    throw DomainError("config: unknown mapping kind '" + s + "'");
}

WeightKind weight_kind_from(const std::string& s) {
    if (s == "elbo") return WeightKind::Elbo;
    if (s == "uniform") return WeightKind::Uniform;
    throw DomainError("config: unknown weight kind '" + s + "'");
}

GridKind grid_kind_from(const std::string& s) {
    if (s == "uniform") return GridKind::Uniform;
    if (s == "edm") return GridKind::EDM;
    if (s == "two_step_eta") return GridKind::TwoStepEta;
    throw DomainError("config: unknown sampler grid kind '" + s + "'");
}

DatasetKind dataset_kind_from(const std::string& s) {
    if (s == "gauss_ring8") return DatasetKind::GaussRing8;
    if (s == "checkerboard") return DatasetKind::Checkerboard;
    if (s == "two_moons") return DatasetKind::TwoMoons;
    throw DomainError("config: unknown dataset kind '" + s + "'");
}

RunConfig default_config() {
    RunConfig cfg;
    cfg.train.eval_every = 1000;
    return cfg;
}

RunConfig parse_config(const std::string& text) {
    RunConfig cfg;
    std::istringstream in(text);
    std::string raw;
    std::string section;  // empty = top level
    int lineno = 0;
    while (std::getline(in, raw)) {
        ++lineno;
        std::string line = trim(raw);
        if (line.empty() || line[0] == '#' || line[0] == ';') continue;
        if (line.front() == '[') {
            require(line.back() == ']', "config: malformed section header at line " + std::to_string(lineno));
            section = trim(line.substr(1, line.size() - 2));
            require(section == "schedule" || section == "head" || section == "kernel" || section == "mapping" ||
                        section == "train" || section == "sampler" || section == "data",
                    "config: unknown section [" + section + "]");
            continue;
        }
        std::size_t eq = line.find('=');
        require(eq != std::string::npos, "config: expected key=value at line " + std::to_string(lineno));
        std::string key = trim(line.substr(0, eq));
        std::string val = trim(line.substr(eq + 1));
        require(!key.empty(), "config: empty key at line " + std::to_string(lineno));
        std::string where = (section.empty() ? key : "[" + section + "] " + key);

        if (section.empty()) {
            if (key == "seed") cfg.seed = parse_u64(val, where);
            else if (key == "out_dir") cfg.out_dir = val;
            else throw DomainError("config: unknown key '" + where + "'");
        } else if (section == "schedule") {
            if (key == "kind") cfg.sched.kind = schedule_kind_from(val);
            else if (key == "sigma_d") cfg.sched.sigma_d = parse_double(val, where);
            else if (key == "eps_t") cfg.sched.eps_t = parse_double(val, where);
            else if (key == "t_max") cfg.sched.t_max = parse_double(val, where);
            else throw DomainError("config: unknown key '" + where + "'");
        } else if (section == "head") {
            if (key == "kind") cfg.head.kind = head_kind_from(val);
            else if (key == "c_noise_scale") cfg.head.c_noise_scale = parse_double(val, where);
            else if (key == "cond_on_gap") cfg.head.cond_on_gap = parse_bool(val, where);
            else throw DomainError("config: unknown key '" + where + "'");
        } else if (section == "kernel") {
            if (key == "kind") cfg.kernel.kind = kernel_kind_from(val);
            else if (key == "c") cfg.kernel.c = parse_double(val, where);
            else if (key == "bandwidth") cfg.kernel.bandwidth = parse_double(val, where);
            else if (key == "dist_floor") cfg.kernel.dist_floor = parse_double(val, where);
            else if (key == "time_weighted") cfg.kernel.time_weighted = parse_bool(val, where);
            else throw DomainError("config: unknown key '" + where + "'");
        } else if (section == "mapping") {
            if (key == "kind") cfg.mapping.kind = mapping_kind_from(val);
            else if (key == "k") cfg.mapping.k = static_cast<int>(parse_int(val, where));
            else if (key == "eta_min") cfg.mapping.eta_min = parse_double_or_auto(val, where);
            else if (key == "eta_max") cfg.mapping.eta_max = parse_double_or_auto(val, where);
            else if (key == "min_gap") cfg.mapping.min_gap = parse_double(val, where);
            else throw DomainError("config: unknown key '" + where + "'");
        } else if (section == "train") {
            if (key == "batch_size") cfg.train.batch_size = static_cast<int>(parse_int(val, where));
            else if (key == "particles") cfg.train.particles = static_cast<int>(parse_int(val, where));
            else if (key == "p_drop") cfg.train.p_drop = parse_double(val, where);
            else if (key == "steps") cfg.train.steps = parse_int(val, where);
            else if (key == "lr") cfg.train.lr = parse_double(val, where);
            else if (key == "beta1") cfg.train.beta1 = parse_double(val, where);
            else if (key == "beta2") cfg.train.beta2 = parse_double(val, where);
            else if (key == "adam_eps") cfg.train.adam_eps = parse_double(val, where);
            else if (key == "ema_rate") cfg.train.ema_rate = parse_double(val, where);
            else if (key == "eval_every") cfg.train.eval_every = parse_int(val, where);
            else if (key == "ckpt_every") cfg.train.ckpt_every = parse_int(val, where);
            else if (key == "weight_kind") cfg.weight.kind = weight_kind_from(val);
            else if (key == "a") cfg.weight.a = static_cast<int>(parse_int(val, where));
            else if (key == "b") cfg.weight.b = parse_double(val, where);
            else if (key == "weight_scale") cfg.weight.scale = parse_double(val, where);
            else throw DomainError("config: unknown key '" + where + "'");
        } else if (section == "sampler") {
            if (key == "kind") cfg.sampler.kind = grid_kind_from(val);
            else if (key == "n_steps") cfg.sampler.n_steps = static_cast<int>(parse_int(val, where));
            else if (key == "rho") cfg.sampler.rho = parse_double(val, where);
            else if (key == "eta_min") cfg.sampler.eta_min = parse_double_or_auto(val, where);
            else if (key == "eta_max") cfg.sampler.eta_max = parse_double_or_auto(val, where);
            else if (key == "t_min") cfg.sampler.t_min = parse_double(val, where);
            else if (key == "t_max") cfg.sampler.t_max = parse_double_or_auto(val, where);
            else if (key == "force_unguided_last") cfg.sampler.force_unguided_last = parse_bool(val, where);
            else throw DomainError("config: unknown key '" + where + "'");
        } else {  // section == "data"
            if (key == "kind") cfg.data = dataset_kind_from(val);
            else throw DomainError("config: unknown key '" + where + "'");
        }
    }
    return cfg;
}

std::string serialize_config(const RunConfig& cfg) {
    std::ostringstream out;
    out << "seed=" << cfg.seed << "\n";
    out << "out_dir=" << cfg.out_dir << "\n";
    out << "\n[schedule]\n";
    out << "kind=" << to_token(cfg.sched.kind) << "\n";
    out << "sigma_d=" << fmt_double(cfg.sched.sigma_d) << "\n";
    out << "eps_t=" << fmt_double(cfg.sched.eps_t) << "\n";
    out << "t_max=" << fmt_double(cfg.sched.t_max) << "\n";
    out << "\n[head]\n";
    out << "kind=" << to_token(cfg.head.kind) << "\n";
    out << "c_noise_scale=" << fmt_double(cfg.head.c_noise_scale) << "\n";
    out << "cond_on_gap=" << (cfg.head.cond_on_gap ? "true" : "false") << "\n";
    out << "\n[kernel]\n";
    out << "kind=" << to_token(cfg.kernel.kind) << "\n";
    out << "c=" << fmt_double(cfg.kernel.c) << "\n";
    out << "bandwidth=" << fmt_double(cfg.kernel.bandwidth) << "\n";
    out << "dist_floor=" << fmt_double(cfg.kernel.dist_floor) << "\n";
    out << "time_weighted=" << (cfg.kernel.time_weighted ? "true" : "false") << "\n";
    out << "\n[mapping]\n";
    out << "kind=" << to_token(cfg.mapping.kind) << "\n";
    out << "k=" << cfg.mapping.k << "\n";
    out << "eta_min=" << fmt_or_auto(cfg.mapping.eta_min) << "\n";
    out << "eta_max=" << fmt_or_auto(cfg.mapping.eta_max) << "\n";
    out << "min_gap=" << fmt_double(cfg.mapping.min_gap) << "\n";
    out << "\n[train]\n";
    out << "batch_size=" << cfg.train.batch_size << "\n";
    out << "particles=" << cfg.train.particles << "\n";
    out << "p_drop=" << fmt_double(cfg.train.p_drop) << "\n";
    out << "steps=" << cfg.train.steps << "\n";
    out << "lr=" << fmt_double(cfg.train.lr) << "\n";
    out << "beta1=" << fmt_double(cfg.train.beta1) << "\n";
    out << "beta2=" << fmt_double(cfg.train.beta2) << "\n";
    out << "adam_eps=" << fmt_double(cfg.train.adam_eps) << "\n";
    out << "ema_rate=" << fmt_double(cfg.train.ema_rate) << "\n";
    out << "eval_every=" << cfg.train.eval_every << "\n";
    out << "ckpt_every=" << cfg.train.ckpt_every << "\n";
    out << "weight_kind=" << to_token(cfg.weight.kind) << "\n";
    out << "a=" << cfg.weight.a << "\n";
    out << "b=" << fmt_double(cfg.weight.b) << "\n";
    out << "weight_scale=" << fmt_double(cfg.weight.scale) << "\n";
    out << "\n[sampler]\n";
    out << "kind=" << to_token(cfg.sampler.kind) << "\n";
    out << "n_steps=" << cfg.sampler.n_steps << "\n";
    out << "rho=" << fmt_double(cfg.sampler.rho) << "\n";
    out << "eta_min=" << fmt_or_auto(cfg.sampler.eta_min) << "\n";
    out << "eta_max=" << fmt_or_auto(cfg.sampler.eta_max) << "\n";
    out << "t_min=" << fmt_double(cfg.sampler.t_min) << "\n";
    out << "t_max=" << fmt_or_auto(cfg.sampler.t_max) << "\n";
    out << "force_unguided_last=" << (cfg.sampler.force_unguided_last ? "true" : "false") << "\n";
    out << "\n[data]\n";
    out << "kind=" << to_token(cfg.data) << "\n";
    return out.str();
}

void validate_config(const RunConfig& cfg) {
    validate(cfg.sched);
    check_head(cfg.head, cfg.sched);
    require(cfg.kernel.c > 0.0, "config: kernel c must be > 0");
    require(cfg.kernel.bandwidth > 0.0, "config: kernel bandwidth must be > 0");
    require(cfg.kernel.dist_floor >= 0.0, "config: kernel dist_floor must be >= 0");
    resolve_mapping(cfg.mapping, cfg.sched);  // throws when the mapping needs bounds the schedule can't give
    require(cfg.weight.a == 1 || cfg.weight.a == 2, "config: weight exponent a must be 1 or 2");
    require(cfg.weight.scale > 0.0, "config: weight_scale must be > 0");
    validate_train(cfg.train);
    schedule_times(cfg.sampler, cfg.sched);  // throws on unbuildable grids
}

}  // namespace imm
