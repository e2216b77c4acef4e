// Conditional flow matching at desk scale: the linear forward process
// x_t = t*x1 + (1-t)*x0, its target velocity u_t = (x1 - x_t)/(1-t), the
// CFM loss with analytic parameter gradients, mask/class conditioning, and
// the Euler sampler. Velocity fields are small trainable stand-ins (a
// per-voxel MLP and a 3x3x3 convolutional variant) plus the analytic
// conditional field used as a fixture.

#ifndef VFORGE_FLOW_HPP
#define VFORGE_FLOW_HPP

#include <memory>
#include <string>
#include <vector>

#include "vforge/rng.hpp"
#include "vforge/volume.hpp"

namespace vforge::flow {

constexpr double kTimeEps = 1e-5;

Volume forward_interpolate(const Volume& x0, const Volume& x1, float t);

// Errors "time-singularity" when t >= 1 - kTimeEps.
Volume target_velocity(const Volume& x_t, const Volume& x1, float t);

struct PathSample {
    Volume x0, x1, x_t, u_t;
    float t = 0.f;
};

// x_t and u_t of the linear path. u_t is the target velocity evaluated on
// the unrounded interpolation, so u_t == x1 - x0 holds to f32 precision for
// every t < 1 - eps (dividing the stored f32 x_t by (1 - t) would not).
PathSample make_path_sample(const Volume& x0, const Volume& x1, float t);

struct Conditioning {
    BinaryMask mask;
    int class_id = 0;
    bool synthetic_origin = false;  // tilde classes (samples generated by the field)
};

class VelocityField {
public:
    virtual ~VelocityField() = default;

    virtual std::string kind() const = 0;
    virtual int param_count() const = 0;
    virtual std::vector<double>& params() = 0;
    virtual const std::vector<double>& params() const = 0;

    virtual Volume eval(const Volume& x_t, const BinaryMask& mask, int class_id,
                        double t) const = 0;

    // Accumulates d(loss)/d(theta) for the squared-error term
    // scale * sum_voxels (v(x_t) - u_t)^2 into grad.
    virtual void accumulate_gradient(const Volume& x_t, const BinaryMask& mask, int class_id,
                                     double t, const Volume& u_t, double scale,
                                     std::vector<double>& grad) const = 0;

    // sum_voxels (v - u_t)^2 in full double precision. The default rounds
    // through eval(); trainable fields override so finite-difference
    // gradient checks are not limited by f32 rounding.
    virtual double sq_error_sum(const Volume& x_t, const BinaryMask& mask, int class_id,
                                double t, const Volume& u_t) const;

    // Payload for serialization; trainable fields return params().
    virtual std::vector<double> payload() const;
};

// Mean over batch items and voxels of |v - u_t|^2.
double cfm_loss(const VelocityField& field, const std::vector<PathSample>& batch,
                const std::vector<Conditioning>& cond);

std::vector<double> cfm_loss_gradient(const VelocityField& field,
                                      const std::vector<PathSample>& batch,
                                      const std::vector<Conditioning>& cond);

// Central finite differences over every parameter; returns the max relative
// error against the analytic gradient.
double loss_gradient_check(VelocityField& field, const std::vector<PathSample>& batch,
                           const std::vector<Conditioning>& cond, double h);

struct EulerSchedule {
    int steps = 100;
    double dt() const { return 1.0 / steps; }
};

// Iterates x <- x + v(x, m, c, k/N) / N for k = 0..N-1 (t never reaches 1).
Volume euler_sample(const VelocityField& field, Volume x0, const BinaryMask& mask,
                    int class_id, EulerSchedule schedule);

// Per-voxel MLP over (x_t, mask, sinusoidal time embedding + learned class
// embedding); the embedding is injected additively at the hidden layer.
class MlpField : public VelocityField {
public:
    MlpField(int hidden, int embed, int n_classes, uint64_t init_seed);

    std::string kind() const override { return "mlp"; }
    int param_count() const override { return int(params_.size()); }
    std::vector<double>& params() override { return params_; }
    const std::vector<double>& params() const override { return params_; }
    Volume eval(const Volume& x_t, const BinaryMask& mask, int class_id,
                double t) const override;
    void accumulate_gradient(const Volume& x_t, const BinaryMask& mask, int class_id, double t,
                             const Volume& u_t, double scale,
                             std::vector<double>& grad) const override;
    double sq_error_sum(const Volume& x_t, const BinaryMask& mask, int class_id, double t,
                        const Volume& u_t) const override;

    int hidden() const { return hidden_; }
    int embed() const { return embed_; }
    int n_classes() const { return n_classes_; }

private:
    friend struct MlpLayout;
    int hidden_, embed_, n_classes_;
    std::vector<double> params_;
};

// Single 3x3x3 convolution (channels: x_t, mask) -> hidden, tanh, 1x1x1
// projection back to one channel, embeddings injected like the MLP.
class ConvField : public VelocityField {
public:
    ConvField(int hidden, int embed, int n_classes, uint64_t init_seed);

    std::string kind() const override { return "conv"; }
    int param_count() const override { return int(params_.size()); }
    std::vector<double>& params() override { return params_; }
    const std::vector<double>& params() const override { return params_; }
    Volume eval(const Volume& x_t, const BinaryMask& mask, int class_id,
                double t) const override;
    void accumulate_gradient(const Volume& x_t, const BinaryMask& mask, int class_id, double t,
                             const Volume& u_t, double scale,
                             std::vector<double>& grad) const override;
    double sq_error_sum(const Volume& x_t, const BinaryMask& mask, int class_id, double t,
                        const Volume& u_t) const override;

    int hidden() const { return hidden_; }
    int embed() const { return embed_; }
    int n_classes() const { return n_classes_; }

private:
    friend struct ConvLayout;
    int hidden_, embed_, n_classes_;
    std::vector<double> params_;
};

// v(x, t) = (target - x) / (1 - t); Euler reproduces the target exactly for
// any step count. No trainable parameters.
class OracleField : public VelocityField {
public:
    explicit OracleField(Volume target);

    std::string kind() const override { return "oracle"; }
    int param_count() const override { return 0; }
    std::vector<double>& params() override { return empty_; }
    const std::vector<double>& params() const override { return empty_; }
    Volume eval(const Volume& x_t, const BinaryMask& mask, int class_id,
                double t) const override;
    void accumulate_gradient(const Volume&, const BinaryMask&, int, double, const Volume&,
                             double, std::vector<double>&) const override {}
    std::vector<double> payload() const override;

    const Volume& target() const { return target_; }

private:
    Volume target_;
    std::vector<double> empty_;
};

// Structured-text header line (JSON: kind, layer sizes, class table size,
// shape for oracle fields) followed by the flat little-endian f32 payload.
void save_field(const VelocityField& field, const std::string& path);
std::unique_ptr<VelocityField> load_field(const std::string& path);

struct TrainResult {
    std::vector<double> trace;  // loss per step, recorded before the update
    bool diverged = false;
};

struct ToyItem {
    Volume x1;
    Conditioning cond;
};

// Two-class dataset of ball masks on a flat background: class 1 bright
// foreground, class 2 faint foreground.
std::vector<ToyItem> make_toy_dataset(Shape shape, int per_class, uint64_t seed);

struct ToyStats {
    double fg_mean[3] = {0, 0, 0};  // indexed by class id (1, 2 used)
    double bg_mean = 0;
    double gap(int class_id) const { return fg_mean[class_id] - bg_mean; }
};
ToyStats measure_toy_stats(const std::vector<ToyItem>& data);

// SGD on the CFM objective, t ~ U[0, 1-eps), x0 ~ N(0, I).
TrainResult train_toy(VelocityField& field, const std::vector<ToyItem>& data, int steps,
                      double lr, int batch_size, Rng& rng);

void write_loss_trace_csv(const std::string& path, const std::vector<double>& trace);

struct FlowSample {
    Volume image;
    BinaryMask label;
    int class_id = 0;
    bool synthetic_origin = true;
};

// Samples `count` pairs, conditioning on masks drawn from `masks` and class
// ids drawn from `classes`; labels are the conditioning masks.
std::vector<FlowSample> generate_dflow(const VelocityField& field,
                                       const std::vector<BinaryMask>& masks,
                                       const std::vector<int>& classes, int count,
                                       EulerSchedule schedule, uint64_t seed);

}  // namespace vforge::flow

#endif
