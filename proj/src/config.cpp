#include "bdlab/config.hpp"

#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <functional>
#include <set>
#include <utility>

#include "bdlab/error.hpp"
#include "bdlab/io.hpp"
#include "bdlab/rng.hpp"

namespace bdlab {

namespace {

[[noreturn]] void parse_fail(const std::string& msg) {
    fail(ErrorKind::ConfigParseError, msg);
}

std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

long long to_ll(const std::string& v, const std::string& where) {
    errno = 0;
    char* end = nullptr;
    const long long x = std::strtoll(v.c_str(), &end, 10);
    if (v.empty() || end != v.c_str() + v.size() || errno == ERANGE)
        parse_fail(where + ": expected an integer, got '" + v + "'");
    return x;
}

int to_int(const std::string& v, const std::string& where) {
    const long long x = to_ll(v, where);
    if (x < -2147483648LL || x > 2147483647LL) parse_fail(where + ": integer out of range");
    return static_cast<int>(x);
}

std::uint64_t to_u64(const std::string& v, const std::string& where) {
    errno = 0;
    char* end = nullptr;
    const unsigned long long x = std::strtoull(v.c_str(), &end, 10);
    if (v.empty() || end != v.c_str() + v.size() || errno == ERANGE || v[0] == '-')
        parse_fail(where + ": expected an unsigned integer, got '" + v + "'");
    return x;
}

double to_double(const std::string& v, const std::string& where) {
    errno = 0;
    char* end = nullptr;
    const double x = std::strtod(v.c_str(), &end);
    if (v.empty() || end != v.c_str() + v.size() || errno == ERANGE || !std::isfinite(x))
        parse_fail(where + ": expected a finite number, got '" + v + "'");
    return x;
}

std::vector<std::string> split_list(const std::string& v) {
    std::vector<std::string> parts;
    std::size_t start = 0;
    if (trim(v).empty()) return parts;
    while (true) {
        const std::size_t comma = v.find(',', start);
        parts.push_back(trim(v.substr(start, comma - start)));
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    return parts;
}

TriggerKind parse_kind(const std::string& name, const std::string& where) {
    if (name == "badnets") return TriggerKind::badnets;
    if (name == "blend") return TriggerKind::blend;
    if (name == "wanet") return TriggerKind::wanet;
    parse_fail(where + ": unknown trigger kind '" + name + "'");
}

template <typename T>
std::string join(const std::vector<T>& xs, std::string (*fmt)(T)) {
    std::string out;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        if (i) out += ",";
        out += fmt(xs[i]);
    }
    return out;
}

struct Binding {
    const char* section;
    const char* key;
    std::function<void(ExperimentConfig&, const std::string&)> set;
    std::function<std::string(const ExperimentConfig&)> get;
};

// One table drives parsing, overrides, and canonical rendering, so a key can
// never exist in one of the three and not the others.
std::vector<Binding> make_bindings() {
    std::vector<Binding> b;

#define BDLAB_BIND(sec, name, parse_expr, render_expr)                                      \
    b.push_back({sec, name,                                                                 \
                 [](ExperimentConfig& c, const std::string& v) {                            \
                     const std::string where = sec "." name;                                \
                     (void)where;                                                           \
                     parse_expr;                                                            \
                 },                                                                         \
                 [](const ExperimentConfig& c) -> std::string { return render_expr; }})
#define BDLAB_INT(sec, name, field) \
    BDLAB_BIND(sec, name, c.field = to_int(v, where), std::to_string(c.field))
#define BDLAB_DOUBLE(sec, name, field) \
    BDLAB_BIND(sec, name, c.field = to_double(v, where), fmt_real(c.field))
#define BDLAB_REAL(sec, name, field) \
    BDLAB_BIND(sec, name, c.field = static_cast<real_t>(to_double(v, where)), fmt_real(c.field))

    BDLAB_INT("data", "classes", data.classes);
    BDLAB_INT("data", "per_class", data.per_class);
    BDLAB_INT("data", "val_per_class", data.val_per_class);
    BDLAB_INT("data", "test_per_class", data.test_per_class);
    BDLAB_INT("data", "channels", data.channels);
    BDLAB_INT("data", "height", data.height);
    BDLAB_INT("data", "width", data.width);
    BDLAB_REAL("data", "background", data.tune.background);
    BDLAB_REAL("data", "blob_amp", data.tune.blob_amp);
    BDLAB_REAL("data", "blob_sigma", data.tune.blob_sigma);
    BDLAB_REAL("data", "ring_radius", data.tune.ring_radius);
    BDLAB_REAL("data", "center_jitter", data.tune.center_jitter);
    BDLAB_REAL("data", "pixel_noise", data.tune.pixel_noise);
    BDLAB_REAL("data", "mix_max", data.tune.mix_max);
    BDLAB_REAL("data", "off_channel", data.tune.off_channel);
    BDLAB_REAL("data", "texture_amp", data.tune.texture_amp);
    BDLAB_REAL("data", "ring0_radius", data.tune.ring0_radius);
    BDLAB_REAL("data", "ring0_sigma", data.tune.ring0_sigma);
    BDLAB_REAL("data", "label_noise", data.tune.label_noise);

    BDLAB_BIND("model", "preset", c.model.preset = trim(v), c.model.preset);
    BDLAB_INT("model", "conv1", model.conv1);
    BDLAB_INT("model", "conv2", model.conv2);

    BDLAB_BIND(
        "trigger", "kinds",
        {
            c.trigger.kinds.clear();
            for (const std::string& part : split_list(v))
                c.trigger.kinds.push_back(parse_kind(part, where));
        },
        join<TriggerKind>(c.trigger.kinds, [](TriggerKind k) { return std::string(to_string(k)); }));
    BDLAB_INT("trigger", "target", trigger.target);
    BDLAB_INT("trigger", "badnets_patch", trigger.badnets_patch);
    BDLAB_DOUBLE("trigger", "badnets_value", trigger.badnets_value);
    BDLAB_DOUBLE("trigger", "blend_alpha", trigger.blend_alpha);
    BDLAB_INT("trigger", "wanet_grid", trigger.wanet_grid);
    BDLAB_DOUBLE("trigger", "wanet_strength", trigger.wanet_strength);

    BDLAB_BIND(
        "poison", "rates",
        {
            c.poison.rates.clear();
            for (const std::string& part : split_list(v))
                c.poison.rates.push_back(to_double(part, where));
        },
        join<double>(c.poison.rates, [](double x) { return fmt_real(x); }));

    BDLAB_INT("train", "epochs", train.epochs);
    BDLAB_INT("train", "batch", train.batch);
    BDLAB_DOUBLE("train", "lr", train.lr);
    BDLAB_DOUBLE("train", "momentum", train.momentum);
    BDLAB_DOUBLE("train", "weight_decay", train.weight_decay);
    BDLAB_BIND(
        "train", "decay_epochs",
        {
            c.train.decay_epochs.clear();
            for (const std::string& part : split_list(v))
                c.train.decay_epochs.push_back(to_int(part, where));
        },
        join<int>(c.train.decay_epochs, [](int x) { return std::to_string(x); }));
    BDLAB_DOUBLE("train", "decay_factor", train.decay_factor);
    BDLAB_INT("train", "patience", train.patience);

    BDLAB_BIND(
        "attack", "epsilons",
        {
            c.attack.epsilons.clear();
            for (const std::string& part : split_list(v))
                c.attack.epsilons.push_back(to_double(part, where));
        },
        join<double>(c.attack.epsilons, [](double x) { return fmt_real(x); }));
    BDLAB_DOUBLE("attack", "step", attack.step);
    BDLAB_INT("attack", "pgd_steps", attack.pgd_steps);
    BDLAB_INT("attack", "fga_steps", attack.fga_steps);
    BDLAB_DOUBLE("attack", "beta", attack.beta);
    BDLAB_BIND(
        "attack", "betas",
        {
            c.attack.betas.clear();
            for (const std::string& part : split_list(v))
                c.attack.betas.push_back(to_double(part, where));
        },
        join<double>(c.attack.betas, [](double x) { return fmt_real(x); }));
    BDLAB_INT("attack", "eval_count", attack.eval_count);

    BDLAB_INT("defense", "unlearn_epochs", defense.unlearn_epochs);
    BDLAB_DOUBLE("defense", "triggered_fraction", defense.triggered_fraction);
    BDLAB_INT("defense", "distill_epochs", defense.distill_epochs);
    BDLAB_DOUBLE("defense", "lambda", defense.lambda);
    BDLAB_DOUBLE("defense", "finetune_lr", defense.finetune_lr);

    BDLAB_BIND("run", "seed", c.seed = to_u64(v, where), std::to_string(c.seed));

#undef BDLAB_REAL
#undef BDLAB_DOUBLE
#undef BDLAB_INT
#undef BDLAB_BIND
    return b;
}

const std::vector<Binding>& bindings() {
    static const std::vector<Binding> table = make_bindings();
    return table;
}

const Binding* find_binding(const std::string& section, const std::string& key) {
    for (const Binding& bind : bindings())
        if (section == bind.section && key == bind.key) return &bind;
    return nullptr;
}

bool known_section(const std::string& section) {
    for (const Binding& bind : bindings())
        if (section == bind.section) return true;
    return false;
}

}  // namespace

ExperimentConfig parse_config_text(const std::string& text) {
    ExperimentConfig cfg;
    std::set<std::pair<std::string, std::string>> seen;
    std::string section;
    std::size_t pos = 0;
    int line_no = 0;
    while (pos <= text.size()) {
        const std::size_t eol = text.find('\n', pos);
        std::string line = text.substr(pos, eol == std::string::npos ? std::string::npos : eol - pos);
        pos = eol == std::string::npos ? text.size() + 1 : eol + 1;
        ++line_no;

        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;

        const std::string at = "config line " + std::to_string(line_no);
        if (line.front() == '[') {
            if (line.back() != ']') parse_fail(at + ": unterminated section header");
            section = trim(line.substr(1, line.size() - 2));
            if (!known_section(section)) parse_fail(at + ": unknown section [" + section + "]");
            continue;
        }
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos) parse_fail(at + ": expected key = value");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (section.empty()) parse_fail(at + ": key '" + key + "' appears before any [section]");
        const Binding* bind = find_binding(section, key);
        if (!bind) parse_fail(at + ": unknown key '" + section + "." + key + "'");
        if (!seen.insert({section, key}).second)
            parse_fail(at + ": duplicate key '" + section + "." + key + "'");
        bind->set(cfg, value);
    }
    return cfg;
}

ExperimentConfig load_config(const std::string& path) {
    require_artifact(path);
    return parse_config_text(read_file(path));
}

void apply_override(ExperimentConfig& cfg, const std::string& spec) {
    const std::size_t eq = spec.find('=');
    if (eq == std::string::npos) parse_fail("override '" + spec + "': expected section.key=value");
    const std::string lhs = trim(spec.substr(0, eq));
    const std::string value = trim(spec.substr(eq + 1));
    const std::size_t dot = lhs.find('.');
    if (dot == std::string::npos) parse_fail("override '" + spec + "': expected section.key=value");
    const Binding* bind = find_binding(trim(lhs.substr(0, dot)), trim(lhs.substr(dot + 1)));
    if (!bind) parse_fail("override '" + spec + "': unknown key");
    bind->set(cfg, value);
}

void validate_config(const ExperimentConfig& cfg) {
    const auto check = [](bool ok, const std::string& msg) {
        if (!ok) fail(ErrorKind::InvalidConfig, "config: " + msg);
    };
    const DataSection& d = cfg.data;
    check(d.classes >= 2, "data.classes must be >= 2");
    check(d.per_class >= 10, "data.per_class must be >= 10");
    check(d.val_per_class >= 1 && d.test_per_class >= 1, "val/test per_class must be >= 1");
    check(d.channels >= 1, "data.channels must be >= 1");
    check(d.height >= 8 && d.width >= 8, "images must be at least 8x8 for the micronet preset");
    check(d.tune.background >= 0 && d.tune.background < 1, "data.background must lie in [0,1)");
    check(d.tune.blob_amp > 0 && d.tune.blob_amp <= 1, "data.blob_amp must lie in (0,1]");
    check(d.tune.blob_sigma > 0, "data.blob_sigma must be > 0");
    check(d.tune.ring_radius >= 0, "data.ring_radius must be >= 0");
    check(d.tune.center_jitter >= 0, "data.center_jitter must be >= 0");
    check(d.tune.pixel_noise >= 0, "data.pixel_noise must be >= 0");
    check(d.tune.mix_max >= 0 && d.tune.mix_max < 1, "data.mix_max must lie in [0,1)");
    check(d.tune.off_channel >= 0 && d.tune.off_channel <= 1, "data.off_channel must lie in [0,1]");
    check(d.tune.texture_amp >= 0 && d.tune.texture_amp < real_t(0.5),
          "data.texture_amp must lie in [0,0.5)");
    check(d.tune.ring0_radius >= 0, "data.ring0_radius must be >= 0");
    check(d.tune.ring0_sigma > 0, "data.ring0_sigma must be > 0");
    check(d.tune.label_noise >= 0 && d.tune.label_noise < real_t(0.5),
          "data.label_noise must lie in [0,0.5) so the true class stays modal");

    check(cfg.model.preset == "micronet", "model.preset '" + cfg.model.preset + "' is not known");
    check(cfg.model.conv1 >= 1 && cfg.model.conv2 >= 1, "model channel counts must be >= 1");

    const TriggerSection& t = cfg.trigger;
    check(!t.kinds.empty(), "trigger.kinds must name at least one trigger");
    for (std::size_t i = 0; i < t.kinds.size(); ++i)
        for (std::size_t j = i + 1; j < t.kinds.size(); ++j)
            check(t.kinds[i] != t.kinds[j], "trigger.kinds lists a kind twice");
    check(t.target >= 0 && t.target < d.classes, "trigger.target must be a valid class");
    check(t.badnets_patch >= 1 && t.badnets_patch <= std::min(d.height, d.width),
          "trigger.badnets_patch must fit the image");
    check(t.badnets_value >= 0 && t.badnets_value <= 1, "trigger.badnets_value must lie in [0,1]");
    check(t.blend_alpha > 0 && t.blend_alpha < 1, "trigger.blend_alpha must lie in (0,1)");
    check(t.wanet_grid >= 2, "trigger.wanet_grid must be >= 2");
    check(t.wanet_strength >= 0, "trigger.wanet_strength must be >= 0");

    check(!cfg.poison.rates.empty(), "poison.rates must list at least one rate");
    for (double r : cfg.poison.rates) check(r > 0 && r < 1, "poison rates must lie in (0,1)");

    const TrainSection& tr = cfg.train;
    check(tr.epochs >= 1, "train.epochs must be >= 1");
    check(tr.batch >= 1, "train.batch must be >= 1");
    check(tr.lr >= 0, "train.lr must be >= 0");
    check(tr.momentum >= 0 && tr.momentum < 1, "train.momentum must lie in [0,1)");
    check(tr.weight_decay >= 0, "train.weight_decay must be >= 0");
    check(tr.decay_factor > 0 && tr.decay_factor <= 1, "train.decay_factor must lie in (0,1]");
    for (int e : tr.decay_epochs) check(e >= 1, "train.decay_epochs entries must be >= 1");
    check(tr.patience >= 1, "train.patience must be >= 1");

    const AttackSection& a = cfg.attack;
    check(!a.epsilons.empty(), "attack.epsilons must list at least one budget");
    for (double e : a.epsilons) check(e > 0, "attack epsilons must be > 0");
    check(a.step > 0, "attack.step must be > 0");
    check(a.pgd_steps >= 1 && a.fga_steps >= 1, "attack step counts must be >= 1");
    check(a.beta >= 0, "attack.beta must be >= 0");
    check(!a.betas.empty(), "attack.betas must list at least one value");
    for (double bb : a.betas) check(bb >= 0, "attack betas must be >= 0");
    check(a.eval_count >= 1, "attack.eval_count must be >= 1");

    const DefenseSection& df = cfg.defense;
    check(df.unlearn_epochs >= 0, "defense.unlearn_epochs must be >= 0");
    check(df.triggered_fraction > 0 && df.triggered_fraction <= 1,
          "defense.triggered_fraction must lie in (0,1]");
    check(df.distill_epochs >= 0, "defense.distill_epochs must be >= 0");
    check(df.lambda >= 0, "defense.lambda must be >= 0");
    check(df.finetune_lr >= 0, "defense.finetune_lr must be >= 0");
}

std::string canonical_config_text(const ExperimentConfig& cfg) {
    std::string out;
    const char* section = "";
    for (const Binding& bind : bindings()) {
        if (std::strcmp(section, bind.section) != 0) {
            section = bind.section;
            out += "[";
            out += section;
            out += "]\n";
        }
        out += bind.key;
        out += " = ";
        out += bind.get(cfg);
        out += "\n";
    }
    return out;
}

std::string config_hash(const ExperimentConfig& cfg) {
    const std::uint64_t h = fnv1a64(canonical_config_text(cfg));
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

}  // namespace bdlab
