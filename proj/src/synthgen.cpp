#include "tracklabel/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <istream>
#include <limits>
#include <numbers>
#include <sstream>

#include "tracklabel/error.hpp"
#include "tracklabel/geometry.hpp"
#include "tracklabel/mot_io.hpp"
#include "tracklabel/rng.hpp"

namespace tracklabel {

std::string_view to_string(MotionModel m) {
    switch (m) {
        case MotionModel::constant_velocity: return "constant-velocity";
        case MotionModel::random_walk: return "random-walk";
        case MotionModel::dance: return "dance";
    }
    return "constant-velocity";
}

MotionModel motion_model_from_string(std::string_view s) {
    if (s == "constant-velocity" || s == "cv") return MotionModel::constant_velocity;
    if (s == "random-walk") return MotionModel::random_walk;
    if (s == "dance") return MotionModel::dance;
    throw ConfigError("unknown motion model '" + std::string(s) + "'");
}

void WorldConfig::validate() const {
    auto rate = [](double v, const char* name) {
        if (!(v >= 0.0 && v <= 1.0)) throw ConfigError(std::string(name) + " must be in [0,1]");
    };
    rate(occlusion_rate, "occlusion_rate");
    rate(fn_rate, "fn_rate");
    rate(fp_rate, "fp_rate");
    rate(min_visibility, "min_visibility");
    rate(lifespan_min_frac, "lifespan_min_frac");
    auto nonneg = [](double v, const char* name) {
        if (!(v >= 0.0)) throw ConfigError(std::string(name) + " must be >= 0");
    };
    nonneg(jitter_sigma, "jitter_sigma");
    nonneg(appearance_sigma, "appearance_sigma");
    nonneg(accel_sigma, "accel_sigma");
    nonneg(dance_jitter, "dance_jitter");
    nonneg(conf_noise, "conf_noise");
    nonneg(fp_conf_sd, "fp_conf_sd");
    nonneg(speed, "speed");
    if (n_frames < 1) throw ConfigError("n_frames must be >= 1");
    if (n_objects < 0) throw ConfigError("n_objects must be >= 0");
    if (image_width < 1 || image_height < 1) throw ConfigError("image size must be positive");
    if (embedding_dim != 0 && embedding_dim < 2) throw ConfigError("embedding_dim must be >= 2 (or 0 to disable)");
    if (!(height_min > 0.0) || height_max < height_min) throw ConfigError("bad height range");
    if (!(aspect > 0.0)) throw ConfigError("aspect must be positive");
    if (occlusion_max_len < 1) throw ConfigError("occlusion_max_len must be >= 1");
    if (!(dance_period > 0.0)) throw ConfigError("dance_period must be positive");
}

namespace {

// Field table shared by the key/value reader and writer.
struct Field {
    const char* key;
    std::function<std::string(const WorldConfig&)> get;
    std::function<void(WorldConfig&, const std::string&)> set;
};

double to_double(const std::string& key, const std::string& v) {
    try {
        std::size_t used = 0;
        double d = std::stod(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return d;
    } catch (const std::exception&) {
        throw ConfigError("bad numeric value for " + key + ": '" + v + "'");
    }
}

template <class T>
Field num(const char* key, T WorldConfig::*member) {
    return Field{key,
                 [member](const WorldConfig& c) {
                     if constexpr (std::is_floating_point_v<T>) {
                         std::ostringstream s;
                         s.precision(17);
                         s << c.*member;
                         return s.str();
                     } else {
                         return std::to_string(c.*member);
                     }
                 },
                 [member, key](WorldConfig& c, const std::string& v) {
                     c.*member = static_cast<T>(to_double(key, v));
                 }};
}

const std::vector<Field>& fields() {
    static const std::vector<Field> table = {
        Field{"seq_id", [](const WorldConfig& c) { return c.seq_id; },
              [](WorldConfig& c, const std::string& v) { c.seq_id = v; }},
        Field{"seed", [](const WorldConfig& c) { return std::to_string(c.seed); },
              [](WorldConfig& c, const std::string& v) {
                  try {
                      c.seed = std::stoull(v);
                  } catch (const std::exception&) {
                      throw ConfigError("bad seed '" + v + "'");
                  }
              }},
        num("n_frames", &WorldConfig::n_frames),
        num("n_objects", &WorldConfig::n_objects),
        num("image_width", &WorldConfig::image_width),
        num("image_height", &WorldConfig::image_height),
        num("frame_rate", &WorldConfig::frame_rate),
        Field{"motion", [](const WorldConfig& c) { return std::string(to_string(c.motion)); },
              [](WorldConfig& c, const std::string& v) { c.motion = motion_model_from_string(v); }},
        num("speed", &WorldConfig::speed),
        num("accel_sigma", &WorldConfig::accel_sigma),
        num("dance_amplitude", &WorldConfig::dance_amplitude),
        num("dance_period", &WorldConfig::dance_period),
        num("dance_jitter", &WorldConfig::dance_jitter),
        num("height_min", &WorldConfig::height_min),
        num("height_max", &WorldConfig::height_max),
        num("aspect", &WorldConfig::aspect),
        num("lifespan_min_frac", &WorldConfig::lifespan_min_frac),
        num("occlusion_rate", &WorldConfig::occlusion_rate),
        num("occlusion_max_len", &WorldConfig::occlusion_max_len),
        num("min_visibility", &WorldConfig::min_visibility),
        num("fn_rate", &WorldConfig::fn_rate),
        num("fp_rate", &WorldConfig::fp_rate),
        num("jitter_sigma", &WorldConfig::jitter_sigma),
        num("conf_base", &WorldConfig::conf_base),
        num("conf_jitter_weight", &WorldConfig::conf_jitter_weight),
        num("conf_occlusion_weight", &WorldConfig::conf_occlusion_weight),
        num("conf_noise", &WorldConfig::conf_noise),
        num("fp_conf_mean", &WorldConfig::fp_conf_mean),
        num("fp_conf_sd", &WorldConfig::fp_conf_sd),
        num("embedding_dim", &WorldConfig::embedding_dim),
        num("appearance_sigma", &WorldConfig::appearance_sigma),
    };
    return table;
}

}  // namespace

std::map<std::string, std::string> to_key_values(const WorldConfig& cfg) {
    std::map<std::string, std::string> kv;
    for (const auto& f : fields()) kv[f.key] = f.get(cfg);
    return kv;
}

WorldConfig world_config_from_key_values(const std::map<std::string, std::string>& kv, WorldConfig base) {
    for (const auto& [key, value] : kv) {
        auto it = std::find_if(fields().begin(), fields().end(), [&](const Field& f) { return key == f.key; });
        if (it == fields().end()) throw ConfigError("unknown world config key '" + key + "'");
        it->set(base, value);
    }
    base.validate();
    return base;
}

std::string write_world_config(const WorldConfig& cfg) {
    std::string out;
    for (const auto& f : fields()) {
        out += f.key;
        out += " = ";
        out += f.get(cfg);
        out += '\n';
    }
    return out;
}

WorldConfig parse_world_config(std::istream& in) {
    std::map<std::string, std::string> kv;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos) continue;
        auto eq = line.find('=');
        if (eq == std::string::npos) throw ParseError("expected key = value", line_no);
        auto strip = [](std::string s) {
            s.erase(0, s.find_first_not_of(" \t\r"));
            s.erase(s.find_last_not_of(" \t\r") + 1);
            return s;
        };
        kv[strip(line.substr(0, eq))] = strip(line.substr(eq + 1));
    }
    return world_config_from_key_values(kv);
}

namespace {

struct ObjectTrack {
    int first = 1;
    int last = 0;
    std::vector<Box> boxes;          // indexed by frame - first
    std::vector<double> occlusion;   // occluded fraction per frame
};

std::vector<float> unit_vector(std::vector<double> v) {
    double n = 0.0;
    for (double x : v) n += x * x;
    n = std::sqrt(n);
    std::vector<float> out(v.size());
    if (n <= 0.0) {
        out[0] = 1.0f;
        return out;
    }
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = static_cast<float>(v[i] / n);
    return out;
}

std::vector<double> gaussian_vector(Rng& rng, int d) {
    std::vector<double> v(static_cast<std::size_t>(d));
    for (auto& x : v) x = rng.normal();
    return v;
}

ObjectTrack simulate_object(const WorldConfig& cfg, int index, Rng& motion, Rng& life,
                            const std::vector<std::pair<double, double>>& group) {
    const double W = cfg.image_width, H = cfg.image_height;
    ObjectTrack t;
    const int F = cfg.n_frames;
    if (cfg.lifespan_min_frac >= 1.0) {
        t.first = 1;
        t.last = F;
    } else {
        const int min_len = std::max(1, static_cast<int>(std::ceil(cfg.lifespan_min_frac * F)));
        const int len = min_len + static_cast<int>(life.below(static_cast<std::uint64_t>(F - min_len + 1)));
        t.first = 1 + static_cast<int>(life.below(static_cast<std::uint64_t>(F - len + 1)));
        t.last = t.first + len - 1;
    }
    const double h = motion.uniform(cfg.height_min, cfg.height_max);
    const double w = cfg.aspect * h;
    double cx = motion.uniform(0.15 * W, 0.85 * W);
    double cy = motion.uniform(0.35 * H, 0.75 * H);
    const double angle = motion.uniform(0.0, 2.0 * std::numbers::pi);
    const double speed = cfg.speed * motion.uniform(0.5, 1.0);
    double vx = speed * std::cos(angle);
    double vy = 0.3 * speed * std::sin(angle);
    const double phase = motion.uniform(0.0, 2.0 * std::numbers::pi);
    double dx = 0.0, dy = 0.0, dvx = 0.0, dvy = 0.0;
    (void)index;

    for (int f = t.first; f <= t.last; ++f) {
        const int k = f - t.first;
        double x = cx, y = cy;
        switch (cfg.motion) {
            case MotionModel::constant_velocity:
                x = cx + vx * k;
                y = cy + vy * k;
                break;
            case MotionModel::random_walk:
                if (k > 0) {
                    vx = 0.97 * vx + motion.normal(0.0, cfg.accel_sigma);
                    vy = 0.97 * vy + motion.normal(0.0, 0.5 * cfg.accel_sigma);
                    cx += vx;
                    cy += vy;
                }
                x = cx;
                y = cy;
                break;
            case MotionModel::dance: {
                if (k > 0) {
                    dvx = 0.9 * dvx + motion.normal(0.0, cfg.dance_jitter);
                    dvy = 0.9 * dvy + motion.normal(0.0, 0.5 * cfg.dance_jitter);
                    dx = 0.98 * dx + dvx;
                    dy = 0.98 * dy + dvy;
                }
                const double omega = 2.0 * std::numbers::pi / cfg.dance_period;
                const auto& g = group[static_cast<std::size_t>(f - 1)];
                x = cx + g.first + 0.5 * cfg.dance_amplitude * std::sin(omega * f + phase) + dx;
                y = cy + g.second + 0.15 * cfg.dance_amplitude * std::cos(omega * f + phase) + dy;
                break;
            }
        }
        t.boxes.push_back(Box{round4(x - 0.5 * w), round4(y - 0.5 * h), round4(w), round4(h)});
    }

    t.occlusion.assign(t.boxes.size(), 0.0);
    int remaining = 0;
    double fraction = 0.0;
    for (std::size_t k = 0; k < t.boxes.size(); ++k) {
        if (remaining == 0 && cfg.occlusion_rate > 0.0 && life.bernoulli(cfg.occlusion_rate)) {
            remaining = 1 + static_cast<int>(life.below(static_cast<std::uint64_t>(cfg.occlusion_max_len)));
            fraction = life.uniform(0.2, 1.0);
        }
        if (remaining > 0) {
            t.occlusion[k] = fraction;
            --remaining;
        }
    }
    return t;
}

}  // namespace

Sequence generate(const WorldConfig& cfg) {
    cfg.validate();
    Rng motion(cfg.seed, 1), life(cfg.seed, 2), det_rng(cfg.seed, 3), emb_rng(cfg.seed, 4), fp_rng(cfg.seed, 5);

    Sequence seq;
    seq.seq_id = cfg.seq_id;
    seq.frame_count = cfg.n_frames;
    seq.frame_rate = cfg.frame_rate;
    seq.image_width = cfg.image_width;
    seq.image_height = cfg.image_height;

    std::vector<std::pair<double, double>> group(static_cast<std::size_t>(cfg.n_frames));
    {
        const double omega = 2.0 * std::numbers::pi / cfg.dance_period;
        for (int f = 1; f <= cfg.n_frames; ++f)
            group[static_cast<std::size_t>(f - 1)] = {cfg.dance_amplitude * std::sin(omega * f),
                                                      0.3 * cfg.dance_amplitude * std::sin(2.0 * omega * f)};
    }

    std::vector<ObjectTrack> objects;
    objects.reserve(static_cast<std::size_t>(cfg.n_objects));
    for (int i = 0; i < cfg.n_objects; ++i) objects.push_back(simulate_object(cfg, i, motion, life, group));

    const int d = cfg.embedding_dim;
    std::vector<std::vector<double>> means;
    for (int i = 0; i < cfg.n_objects && d > 0; ++i) {
        auto m = unit_vector(gaussian_vector(emb_rng, d));
        means.emplace_back(m.begin(), m.end());
    }

    LabelSet gt;
    gt.seq_id = cfg.seq_id;
    DetId next_id = 1;
    const double noise_scale = d > 0 ? cfg.appearance_sigma / std::sqrt(static_cast<double>(d)) : 0.0;

    for (int f = 1; f <= cfg.n_frames; ++f) {
        for (int i = 0; i < cfg.n_objects; ++i) {
            const auto& obj = objects[static_cast<std::size_t>(i)];
            if (f < obj.first || f > obj.last) continue;
            const auto k = static_cast<std::size_t>(f - obj.first);
            const Box& box = obj.boxes[k];
            const double occ = obj.occlusion[k];
            const double visibility = 1.0 - occ;
            const bool detectable = visibility >= cfg.min_visibility;

            LabelEntry e;
            e.frame = f;
            e.track_id = i + 1;
            e.box = box;
            e.provenance = LabelProvenance::ground_truth;
            e.visibility = round4(visibility);
            e.evaluable = detectable;
            gt.entries.push_back(e);

            if (!detectable || det_rng.bernoulli(cfg.fn_rate)) continue;
            Detection det;
            det.det_id = next_id++;
            det.frame = f;
            det.source = DetectionSource::synthetic;
            Box j = box;
            if (cfg.jitter_sigma > 0.0) {
                j.left += det_rng.normal(0.0, cfg.jitter_sigma);
                j.top += det_rng.normal(0.0, cfg.jitter_sigma);
                j.width = std::max(1.0, j.width + det_rng.normal(0.0, cfg.jitter_sigma));
                j.height = std::max(1.0, j.height + det_rng.normal(0.0, cfg.jitter_sigma));
            }
            det.box = Box{round4(j.left), round4(j.top), round4(j.width), round4(j.height)};
            const double noise = cfg.conf_noise > 0.0 ? det_rng.normal(0.0, cfg.conf_noise) : 0.0;
            const double conf = cfg.conf_base - cfg.conf_jitter_weight * (1.0 - iou(det.box, box)) -
                                cfg.conf_occlusion_weight * occ + noise;
            det.confidence = round4(std::clamp(conf, 0.0, 1.0));
            if (d > 0) {
                std::vector<double> v = means[static_cast<std::size_t>(i)];
                for (auto& x : v) x += noise_scale * emb_rng.normal();
                det.embedding = unit_vector(std::move(v));
            }
            seq.detections.push_back(std::move(det));
        }

        int n_fp = 0;
        for (int i = 0; i < cfg.n_objects; ++i)
            if (fp_rng.bernoulli(cfg.fp_rate)) ++n_fp;
        for (int q = 0; q < n_fp; ++q) {
            Detection det;
            det.det_id = next_id++;
            det.frame = f;
            det.source = DetectionSource::synthetic;
            const double h = fp_rng.uniform(cfg.height_min, cfg.height_max);
            const double w = cfg.aspect * h;
            const double left = fp_rng.uniform(0.0, std::max(1.0, cfg.image_width - w));
            const double top = fp_rng.uniform(0.0, std::max(1.0, cfg.image_height - h));
            det.box = Box{round4(left), round4(top), round4(w), round4(h)};
            det.confidence = round4(std::clamp(fp_rng.normal(cfg.fp_conf_mean, cfg.fp_conf_sd), 0.0, 1.0));
            if (d > 0) det.embedding = unit_vector(gaussian_vector(emb_rng, d));
            seq.detections.push_back(std::move(det));
        }
    }
    gt.normalize();
    seq.ground_truth = std::move(gt);
    return seq;
}

ShiftResult domain_shift(const WorldConfig& cfg, const ShiftParams& shift) {
    ShiftResult r;
    r.config = cfg;
    auto& c = r.config;
    auto apply = [&](double& field, double delta, double lo, double hi, const char* name) {
        const double v = field + delta;
        field = std::clamp(v, lo, hi);
        if (field != v) r.clamped.emplace_back(name);
    };
    constexpr double inf = std::numeric_limits<double>::infinity();
    apply(c.appearance_sigma, shift.appearance_sigma, 0.0, inf, "appearance_sigma");
    apply(c.jitter_sigma, shift.jitter_sigma, 0.0, inf, "jitter_sigma");
    apply(c.fn_rate, shift.fn_rate, 0.0, 1.0, "fn_rate");
    apply(c.fp_rate, shift.fp_rate, 0.0, 1.0, "fp_rate");
    apply(c.occlusion_rate, shift.occlusion_rate, 0.0, 1.0, "occlusion_rate");
    apply(c.conf_base, shift.conf_base, 0.0, 1.0, "conf_base");
    if (shift.speed_scale < 0.0) r.clamped.emplace_back("speed");
    c.speed = std::max(0.0, c.speed * shift.speed_scale);
    if (shift.motion) c.motion = *shift.motion;
    return r;
}

std::vector<SceneShape> scene_at(const Sequence& seq, int frame) {
    std::vector<SceneShape> out;
    if (!seq.ground_truth) return out;
    for (const auto& e : seq.ground_truth->entries)
        if (e.frame == frame) out.push_back(SceneShape{e.track_id, e.box, e.visibility});
    return out;
}

}  // namespace tracklabel
