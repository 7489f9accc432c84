#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "tracklabel/types.hpp"

namespace tracklabel {

enum class MotionModel { constant_velocity, random_walk, dance };

std::string_view to_string(MotionModel m);
MotionModel motion_model_from_string(std::string_view s);

// Parametric world for synthetic sequences: ground-truth motion, occlusion,
// detector corruption and appearance embeddings.
struct WorldConfig {
    std::string seq_id = "synth";
    std::uint64_t seed = 1;
    int n_frames = 300;
    int n_objects = 8;
    int image_width = 1920;
    int image_height = 1080;
    double frame_rate = 30.0;

    MotionModel motion = MotionModel::constant_velocity;
    double speed = 2.0;             // px/frame, initial speed scale
    double accel_sigma = 0.3;       // random-walk velocity noise, px/frame^2
    double dance_amplitude = 120.0; // px
    double dance_period = 90.0;     // frames
    double dance_jitter = 0.5;      // px/frame per-object drift noise

    double height_min = 90.0;
    double height_max = 220.0;
    double aspect = 0.41;  // width / height
    double lifespan_min_frac = 1.0;

    // Occlusion events: per object and frame, an event starts with this
    // probability, lasts 1..occlusion_max_len frames and hides a uniform
    // fraction in [0.2, 1] of the object. Frames whose visibility falls
    // below min_visibility are undetectable and marked non-evaluable in GT.
    double occlusion_rate = 0.0;
    int occlusion_max_len = 6;
    double min_visibility = 0.25;

    double fn_rate = 0.0;  // miss probability for a detectable box
    double fp_rate = 0.0;  // per frame, FP count ~ Binomial(n_objects, fp_rate)
    double jitter_sigma = 0.0;

    // conf = clamp(base - a*(1 - IoU(jittered, gt)) - b*occluded_fraction + N(0, s))
    double conf_base = 0.9;
    double conf_jitter_weight = 0.4;
    double conf_occlusion_weight = 0.5;
    double conf_noise = 0.05;
    double fp_conf_mean = 0.25;
    double fp_conf_sd = 0.12;

    int embedding_dim = 16;  // 0 disables embeddings
    double appearance_sigma = 0.3;

    // Throws ConfigError.
    void validate() const;
};

std::map<std::string, std::string> to_key_values(const WorldConfig& cfg);
WorldConfig world_config_from_key_values(const std::map<std::string, std::string>& kv, WorldConfig base = {});
std::string write_world_config(const WorldConfig& cfg);
WorldConfig parse_world_config(std::istream& in);

// Deterministic in the config. Detections are ordered by frame and carry
// det_ids 1..N in that order; ground truth track ids are 1..n_objects.
Sequence generate(const WorldConfig& cfg);

struct ShiftParams {
    double appearance_sigma = 0.0;
    double jitter_sigma = 0.0;
    double fn_rate = 0.0;
    double fp_rate = 0.0;
    double occlusion_rate = 0.0;
    double conf_base = 0.0;
    double speed_scale = 1.0;
    std::optional<MotionModel> motion;
};

struct ShiftResult {
    WorldConfig config;
    std::vector<std::string> clamped;  // fields pulled back into range
};

ShiftResult domain_shift(const WorldConfig& cfg, const ShiftParams& shift);

// Per-frame vector description of the synthetic scene (what a renderer
// would draw); used by the annotation service instead of images.
struct SceneShape {
    TrackId object = 0;
    Box box;
    double visibility = 1.0;
};
std::vector<SceneShape> scene_at(const Sequence& seq, int frame);

}  // namespace tracklabel
