#pragma once

// Three-stage optimization: losses, hand-derived backpropagation through the
// rasterizer / texture / networks, Adam updates, simplified density control
// and the stage schedule.

#include <string>
#include <vector>

#include "ghs/avatar.hpp"
#include "ghs/renderer.hpp"
#include "ghs/sequence.hpp"

namespace ghs {

// Per-iteration loss weights. lambda_expr/lambda_pose halve on the schedule;
// lambda_vgg switches on after vgg_start_iter.
struct LossWeights {
    double lambda_expr = 1000, lambda_pose = 1000, lambda_lbs = 1;
    double lambda_vgg = 0;
    double lambda_head = 1;
    double lambda_warp = 0.025;
    double lambda_anchor_alpha = 0.15;
    double lambda_anchor = 1;
};

struct TrainConfig {
    int stage1_iters = 4000, stage2_iters = 46000, stage3_iters = 20000;
    int n_anchors = 1024;
    int warp_grid_stride = 1;
    int densify_interval = 100;
    double densify_grad_threshold_pre_vgg = 2.5e-4;
    double densify_grad_threshold_post_vgg = 8e-3;
    double densify_scale_threshold = 0.01;  // split above, clone below
    double prune_opacity = 0.005;
    int max_gaussians = 20000;
    int vgg_start_iter = 10000;
    std::vector<int> lambda_halve_iters{15000, 30000, 45000};
    std::vector<int> lr_halve_iters{30000, 60000};
    int anchor_cleanup_interval = 10000;
    double lr_net = 1e-3;       // MLP_d, warp/fine nets, textures, anchors
    double lr_mu = 1.6e-4;      // Gaussian parameter rates (splatting defaults)
    double lr_sh = 2.5e-3;
    double lr_opacity = 0.05;
    double lr_scale = 5e-3;
    double lr_quat = 1e-3;
    double lambda_warp = 0.025;
    double finetune_lr = 1e-4;
    unsigned seed = 1;
    int threads = 1;
    int held_out_every = 8;  // every k-th frame is test

    // Scales the full schedule down by 10x and evaluates the warp/fine nets
    // on a stride-4 pixel grid.
    static TrainConfig desk();

    LossWeights weights_at(int iter) const;
    double lr_scale_at(int iter) const;
    int total_iters() const {
        return stage1_iters + stage2_iters + stage3_iters;
    }
    int stage_at(int iter) const;  // 1, 2 or 3
};

struct FrameData {
    FrameParams params;
    Image gt;         // H x W x 3
    Image head_mask;  // H x W x 1
    std::vector<double> frame_enc;
};

// Loads images/masks and precomputes frame encodings.
std::vector<FrameData> load_frame_data(const FrameSequence& seq);

struct RenderOptions {
    bool render_anchors = true;
    bool render_body = true;
    int warp_grid_stride = 1;
    int threads = 1;
};

struct LossBreakdown {
    double total = 0, rgb = 0, flame = 0, vgg = 0, head = 0, warp = 0,
           anchor_alpha = 0, anchor = 0;
};

// Activated-space gradients matching the model's parameter shapes.
struct ModelGrads {
    std::vector<Vec3> d_mu, d_scale;
    std::vector<Quat> d_quat;
    std::vector<double> d_opacity, d_sh;
    std::vector<Vec3> d_anchor_mu, d_anchor_rgb;
    std::vector<double> d_anchor_scale, d_anchor_opacity;
    MlpGrads d_deform, d_warp_net, d_fine_net;
    std::vector<double> d_coarse, d_latent;
    std::vector<double> mu2d_grad_norm;  // per regular Gaussian, for density
};

// Individual losses (also used standalone by tests).
double loss_rgb(const Image& render, const Image& gt);
double loss_head(const Image& alpha, const Image& alpha_head);
double loss_warp(const Image& warp);  // H x W x 2
double loss_anchor_alpha(const std::vector<double>& opacities);

// Pluggable feature loss standing in for VGG: 3-level luminance-gradient
// pyramid, mean squared feature difference. Adds d(loss)/d(a) into d_a when
// given.
double feature_loss(const Image& a, const Image& b, Image* d_a = nullptr);

// Full forward pass of Eq. (render) for one frame.
Framebuffer render_avatar(const AvatarModel& model, const FrameParams& frame,
                          const std::vector<double>& frame_enc,
                          const RenderOptions& opts, bool clamp_output = true);

// Forward losses and, when grads != nullptr, all parameter gradients.
LossBreakdown compute_loss_and_grads(const AvatarModel& model,
                                     const FrameData& frame,
                                     const LossWeights& weights,
                                     const RenderOptions& opts,
                                     ModelGrads* grads);

ModelGrads make_model_grads(const AvatarModel& model);

// Warm-up initialization: one Gaussian per rig mesh vertex.
GaussianSet init_gaussians_from_rig(const Rig& rig, std::mt19937& rng);

class Trainer {
public:
    Trainer(AvatarModel model, std::vector<FrameData> train_frames,
            TrainConfig cfg);

    // Runs the full three-stage schedule; appends one CSV row per iteration
    // to log_csv when non-empty.
    void run(const std::string& log_csv = "");

    // Single optimization step at the current iteration (tests drive this
    // directly). Throws InvalidState past the end of the schedule.
    LossBreakdown step();

    int iter() const { return iter_; }
    int stage() const { return cfg_.stage_at(iter_); }
    const AvatarModel& model() const { return model_; }
    AvatarModel& model() { return model_; }
    const TrainConfig& config() const { return cfg_; }
    const std::vector<FrameData>& frames() const { return frames_; }

private:
    void begin_stage2();
    void apply_update(const ModelGrads& grads, const LossBreakdown& losses);
    void densify_and_prune(double threshold);
    void rebuild_gaussian_state(const std::vector<int>& keep_src,
                                const std::vector<int>& fresh);

    struct Adam {
        std::vector<double> m, v;
        void ensure(size_t n);
        void step(std::vector<double>& x, const std::vector<double>& g,
                  double lr, int t);
    };
    struct MlpAdam {
        MlpGrads m, v;
        void step(Mlp& mlp, const MlpGrads& g, double lr, int t);
    };

    AvatarModel model_;
    std::vector<FrameData> frames_;
    TrainConfig cfg_;
    std::mt19937 rng_;
    int iter_ = 0;
    int adam_t_ = 0;
    bool anchors_initialized_ = false;

    Adam ad_mu_, ad_logscale_, ad_quat_, ad_logit_op_, ad_sh_;
    Adam ad_amu_, ad_alogscale_, ad_alogit_op_, ad_argb_;
    Adam ad_coarse_, ad_latent_;
    MlpAdam ad_deform_, ad_wnet_, ad_fnet_;

    // Raw optimization variables; the model holds the activated values.
    std::vector<double> raw_logscale_, raw_logit_op_;
    std::vector<double> raw_a_logscale_, raw_a_logit_op_;

    std::vector<double> densify_grad_accum_;
    std::vector<int> densify_count_;
};

// Per-frame test-time tracking: finite-difference descent on theta/psi with
// the RGB loss only. Returns the refined parameters.
FrameParams finetune_frame(const AvatarModel& model, const FrameData& frame,
                           const RenderOptions& opts, double lr, int iters);

}  // namespace ghs
