#include "vforge/flow.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>

#include <json.hpp>

#include "vforge/kernels.hpp"

namespace vforge::flow {

Volume forward_interpolate(const Volume& x0, const Volume& x1, float t) {
    require_same_shape(x0.shape, x1.shape);
    Volume out(x0.shape);
    const int64_t n = out.shape.voxels();
#pragma omp parallel for schedule(static)
    for (int64_t i = 0; i < n; ++i)
        out.data[size_t(i)] = t * x1.data[size_t(i)] + (1.f - t) * x0.data[size_t(i)];
    return out;
}

Volume target_velocity(const Volume& x_t, const Volume& x1, float t) {
    require_same_shape(x_t.shape, x1.shape);
    if (double(t) >= 1.0 - kTimeEps)
        throw Error("time-singularity", "target velocity undefined at t >= 1 - eps");
    Volume out(x_t.shape);
    const float inv = 1.f / (1.f - t);
    const int64_t n = out.shape.voxels();
#pragma omp parallel for schedule(static)
    for (int64_t i = 0; i < n; ++i)
        out.data[size_t(i)] = (x1.data[size_t(i)] - x_t.data[size_t(i)]) * inv;
    return out;
}

PathSample make_path_sample(const Volume& x0, const Volume& x1, float t) {
    require_same_shape(x0.shape, x1.shape);
    if (double(t) >= 1.0 - kTimeEps)
        throw Error("time-singularity", "path samples need t < 1 - eps");
    PathSample s;
    s.x0 = x0;
    s.x1 = x1;
    s.t = t;
    s.x_t = Volume(x0.shape);
    s.u_t = Volume(x0.shape);
    // The velocity is evaluated on the unrounded interpolation: dividing the
    // f32-rounded x_t by (1 - t) would amplify its rounding near t = 1 and
    // break the u_t == x1 - x0 identity.
    const double td = double(t);
    const double inv = 1.0 / (1.0 - td);
    const int64_t n = x0.shape.voxels();
#pragma omp parallel for schedule(static)
    for (int64_t i = 0; i < n; ++i) {
        double a = double(x0.data[size_t(i)]), b = double(x1.data[size_t(i)]);
        double xt = td * b + (1.0 - td) * a;
        s.x_t.data[size_t(i)] = float(xt);
        s.u_t.data[size_t(i)] = float((b - xt) * inv);
    }
    return s;
}

std::vector<double> VelocityField::payload() const { return params(); }

double VelocityField::sq_error_sum(const Volume& x_t, const BinaryMask& mask, int class_id,
                                   double t, const Volume& u_t) const {
    Volume v = eval(x_t, mask, class_id, t);
    double acc = 0.0;
    for (size_t i = 0; i < v.data.size(); ++i) {
        double d = double(v.data[i]) - double(u_t.data[i]);
        acc += d * d;
    }
    return acc;
}

namespace {

void sinusoidal_time_embedding(double t, int embed, double* out) {
    for (int j = 0; j < embed; ++j) {
        double freq = std::pow(2.0, double(j / 2));
        double phase = 3.14159265358979323846 * t * freq;
        out[j] = (j % 2 == 0) ? std::sin(phase) : std::cos(phase);
    }
}

}  // namespace

struct MlpLayout {
    int C, E, H;
    explicit MlpLayout(const MlpField& f) : C(f.n_classes_), E(f.embed_), H(f.hidden_) {}
    MlpLayout(int c, int e, int h) : C(c), E(e), H(h) {}
    int class_table() const { return 0; }
    int w1() const { return C * E; }
    int b1() const { return w1() + H * 2; }
    int v() const { return b1() + H; }
    int w2() const { return v() + H * E; }
    int b2() const { return w2() + H; }
    int total() const { return b2() + 1; }
};

MlpField::MlpField(int hidden, int embed, int n_classes, uint64_t init_seed)
    : hidden_(hidden), embed_(embed), n_classes_(n_classes) {
    MlpLayout L(n_classes, embed, hidden);
    params_.assign(size_t(L.total()), 0.0);
    Rng rng(init_seed, 0);
    for (int i = 0; i < n_classes * embed; ++i)
        params_[size_t(L.class_table() + i)] = rng.normal() * 0.1;
    double w1_scale = 1.0 / std::sqrt(2.0 + embed);
    for (int i = 0; i < hidden * 2; ++i) params_[size_t(L.w1() + i)] = rng.normal() * w1_scale;
    for (int i = 0; i < hidden * embed; ++i) params_[size_t(L.v() + i)] = rng.normal() * w1_scale;
    double w2_scale = 1.0 / std::sqrt(double(hidden));
    for (int i = 0; i < hidden; ++i) params_[size_t(L.w2() + i)] = rng.normal() * w2_scale;
}

namespace {

// Hidden pre-activation bias shared by every voxel of one (t, c) pair.
void mlp_injection(const MlpLayout& L, const std::vector<double>& p, int class_id, double t,
                   std::vector<double>& emb, std::vector<double>& inj) {
    emb.resize(size_t(L.E));
    sinusoidal_time_embedding(t, L.E, emb.data());
    for (int e = 0; e < L.E; ++e) emb[size_t(e)] += p[size_t(L.class_table() + class_id * L.E + e)];
    inj.assign(size_t(L.H), 0.0);
    for (int h = 0; h < L.H; ++h) {
        double acc = p[size_t(L.b1() + h)];
        for (int e = 0; e < L.E; ++e) acc += p[size_t(L.v() + h * L.E + e)] * emb[size_t(e)];
        inj[size_t(h)] = acc;
    }
}

}  // namespace

Volume MlpField::eval(const Volume& x_t, const BinaryMask& mask, int class_id, double t) const {
    require_same_shape(x_t.shape, mask.shape);
    if (class_id < 0 || class_id >= n_classes_)
        throw Error("bad-class", "class id out of range");
    MlpLayout L(*this);
    std::vector<double> emb, inj;
    mlp_injection(L, params_, class_id, t, emb, inj);
    const double* p = params_.data();

    Volume out(x_t.shape);
    const int64_t n = x_t.shape.voxels();
#pragma omp parallel for schedule(static)
    for (int64_t i = 0; i < n; ++i) {
        double x = x_t.data[size_t(i)], m = mask.data[size_t(i)];
        double v = p[L.b2()];
        for (int h = 0; h < L.H; ++h) {
            double pre = inj[size_t(h)] + p[L.w1() + h * 2] * x + p[L.w1() + h * 2 + 1] * m;
            v += p[L.w2() + h] * std::tanh(pre);
        }
        out.data[size_t(i)] = float(v);
    }
    return out;
}

void MlpField::accumulate_gradient(const Volume& x_t, const BinaryMask& mask, int class_id,
                                   double t, const Volume& u_t, double scale,
                                   std::vector<double>& grad) const {
    MlpLayout L(*this);
    std::vector<double> emb, inj;
    mlp_injection(L, params_, class_id, t, emb, inj);
    const double* p = params_.data();
    double* g = grad.data();

    std::vector<double> dinj(size_t(L.H), 0.0);
    std::vector<double> hh(size_t(L.H));
    const int64_t n = x_t.shape.voxels();
    for (int64_t i = 0; i < n; ++i) {
        double x = x_t.data[size_t(i)], m = mask.data[size_t(i)];
        double v = p[L.b2()];
        for (int h = 0; h < L.H; ++h) {
            double pre = inj[size_t(h)] + p[L.w1() + h * 2] * x + p[L.w1() + h * 2 + 1] * m;
            hh[size_t(h)] = std::tanh(pre);
            v += p[L.w2() + h] * hh[size_t(h)];
        }
        double r = 2.0 * scale * (v - double(u_t.data[size_t(i)]));
        g[L.b2()] += r;
        for (int h = 0; h < L.H; ++h) {
            g[L.w2() + h] += r * hh[size_t(h)];
            double dpre = r * p[L.w2() + h] * (1.0 - hh[size_t(h)] * hh[size_t(h)]);
            g[L.w1() + h * 2] += dpre * x;
            g[L.w1() + h * 2 + 1] += dpre * m;
            dinj[size_t(h)] += dpre;
        }
    }
    for (int h = 0; h < L.H; ++h) {
        g[L.b1() + h] += dinj[size_t(h)];
        for (int e = 0; e < L.E; ++e) {
            g[L.v() + h * L.E + e] += dinj[size_t(h)] * emb[size_t(e)];
            g[L.class_table() + class_id * L.E + e] +=
                dinj[size_t(h)] * p[L.v() + h * L.E + e];
        }
    }
}

double MlpField::sq_error_sum(const Volume& x_t, const BinaryMask& mask, int class_id, double t,
                              const Volume& u_t) const {
    MlpLayout L(*this);
    std::vector<double> emb, inj;
    mlp_injection(L, params_, class_id, t, emb, inj);
    const double* p = params_.data();

    const int64_t n = x_t.shape.voxels();
    std::vector<double> partial(size_t(x_t.shape.d), 0.0);
    const int64_t plane = int64_t(x_t.shape.h) * x_t.shape.w;
#pragma omp parallel for schedule(static)
    for (int z = 0; z < x_t.shape.d; ++z) {
        double acc = 0.0;
        for (int64_t i = int64_t(z) * plane; i < int64_t(z + 1) * plane; ++i) {
            double x = x_t.data[size_t(i)], m = mask.data[size_t(i)];
            double v = p[L.b2()];
            for (int h = 0; h < L.H; ++h) {
                double pre = inj[size_t(h)] + p[L.w1() + h * 2] * x + p[L.w1() + h * 2 + 1] * m;
                v += p[L.w2() + h] * std::tanh(pre);
            }
            double d = v - double(u_t.data[size_t(i)]);
            acc += d * d;
        }
        partial[size_t(z)] = acc;
    }
    double total = 0.0;
    for (double v : partial) total += v;
    (void)n;
    return total;
}

struct ConvLayout {
    int C, E, H;
    explicit ConvLayout(const ConvField& f) : C(f.n_classes_), E(f.embed_), H(f.hidden_) {}
    ConvLayout(int c, int e, int h) : C(c), E(e), H(h) {}
    int class_table() const { return 0; }
    int w1() const { return C * E; }                 // H x 2 x 27
    int b1() const { return w1() + H * 2 * 27; }
    int v() const { return b1() + H; }
    int w2() const { return v() + H * E; }
    int b2() const { return w2() + H; }
    int total() const { return b2() + 1; }
};

ConvField::ConvField(int hidden, int embed, int n_classes, uint64_t init_seed)
    : hidden_(hidden), embed_(embed), n_classes_(n_classes) {
    ConvLayout L(n_classes, embed, hidden);
    params_.assign(size_t(L.total()), 0.0);
    Rng rng(init_seed, 1);
    for (int i = 0; i < n_classes * embed; ++i)
        params_[size_t(L.class_table() + i)] = rng.normal() * 0.1;
    double w1_scale = 1.0 / std::sqrt(2.0 * 27 + embed);
    for (int i = 0; i < hidden * 2 * 27; ++i) params_[size_t(L.w1() + i)] = rng.normal() * w1_scale;
    for (int i = 0; i < hidden * embed; ++i) params_[size_t(L.v() + i)] = rng.normal() * w1_scale;
    double w2_scale = 1.0 / std::sqrt(double(hidden));
    for (int i = 0; i < hidden; ++i) params_[size_t(L.w2() + i)] = rng.normal() * w2_scale;
}

namespace {

void conv_injection(const ConvLayout& L, const std::vector<double>& p, int class_id, double t,
                    std::vector<double>& emb, std::vector<double>& inj) {
    emb.resize(size_t(L.E));
    sinusoidal_time_embedding(t, L.E, emb.data());
    for (int e = 0; e < L.E; ++e) emb[size_t(e)] += p[size_t(L.class_table() + class_id * L.E + e)];
    inj.assign(size_t(L.H), 0.0);
    for (int h = 0; h < L.H; ++h) {
        double acc = p[size_t(L.b1() + h)];
        for (int e = 0; e < L.E; ++e) acc += p[size_t(L.v() + h * L.E + e)] * emb[size_t(e)];
        inj[size_t(h)] = acc;
    }
}

// Gathered 2x27 neighborhood (x_t then mask channels), reflect boundary.
void gather_patch(const Volume& x_t, const BinaryMask& mask, int z, int y, int x,
                  double patch[54]) {
    const Shape s = x_t.shape;
    int k = 0;
    for (int dz = -1; dz <= 1; ++dz)
        for (int dy = -1; dy <= 1; ++dy)
            for (int dx = -1; dx <= 1; ++dx, ++k) {
                int zz = kernels::reflect_index(z + dz, s.d);
                int yy = kernels::reflect_index(y + dy, s.h);
                int xx = kernels::reflect_index(x + dx, s.w);
                patch[k] = x_t.at(zz, yy, xx);
                patch[27 + k] = mask.at(zz, yy, xx);
            }
}

}  // namespace

Volume ConvField::eval(const Volume& x_t, const BinaryMask& mask, int class_id, double t) const {
    require_same_shape(x_t.shape, mask.shape);
    if (class_id < 0 || class_id >= n_classes_)
        throw Error("bad-class", "class id out of range");
    ConvLayout L(*this);
    std::vector<double> emb, inj;
    conv_injection(L, params_, class_id, t, emb, inj);
    const double* p = params_.data();

    const Shape s = x_t.shape;
    Volume out(s);
#pragma omp parallel for schedule(static)
    for (int z = 0; z < s.d; ++z)
        for (int y = 0; y < s.h; ++y)
            for (int x = 0; x < s.w; ++x) {
                double patch[54];
                gather_patch(x_t, mask, z, y, x, patch);
                double v = p[L.b2()];
                for (int h = 0; h < L.H; ++h) {
                    double pre = inj[size_t(h)];
                    const double* w = p + L.w1() + h * 54;
                    for (int k = 0; k < 54; ++k) pre += w[k] * patch[k];
                    v += p[L.w2() + h] * std::tanh(pre);
                }
                out.at(z, y, x) = float(v);
            }
    return out;
}

void ConvField::accumulate_gradient(const Volume& x_t, const BinaryMask& mask, int class_id,
                                    double t, const Volume& u_t, double scale,
                                    std::vector<double>& grad) const {
    ConvLayout L(*this);
    std::vector<double> emb, inj;
    conv_injection(L, params_, class_id, t, emb, inj);
    const double* p = params_.data();
    double* g = grad.data();

    std::vector<double> dinj(size_t(L.H), 0.0);
    std::vector<double> hh(size_t(L.H));
    const Shape s = x_t.shape;
    for (int z = 0; z < s.d; ++z)
        for (int y = 0; y < s.h; ++y)
            for (int x = 0; x < s.w; ++x) {
                double patch[54];
                gather_patch(x_t, mask, z, y, x, patch);
                double v = p[L.b2()];
                for (int h = 0; h < L.H; ++h) {
                    double pre = inj[size_t(h)];
                    const double* w = p + L.w1() + h * 54;
                    for (int k = 0; k < 54; ++k) pre += w[k] * patch[k];
                    hh[size_t(h)] = std::tanh(pre);
                    v += p[L.w2() + h] * hh[size_t(h)];
                }
                double r = 2.0 * scale * (v - double(u_t.at(z, y, x)));
                g[L.b2()] += r;
                for (int h = 0; h < L.H; ++h) {
                    g[L.w2() + h] += r * hh[size_t(h)];
                    double dpre = r * p[L.w2() + h] * (1.0 - hh[size_t(h)] * hh[size_t(h)]);
                    double* gw = g + L.w1() + h * 54;
                    for (int k = 0; k < 54; ++k) gw[k] += dpre * patch[k];
                    dinj[size_t(h)] += dpre;
                }
            }
    for (int h = 0; h < L.H; ++h) {
        g[L.b1() + h] += dinj[size_t(h)];
        for (int e = 0; e < L.E; ++e) {
            g[L.v() + h * L.E + e] += dinj[size_t(h)] * emb[size_t(e)];
            g[L.class_table() + class_id * L.E + e] +=
                dinj[size_t(h)] * p[L.v() + h * L.E + e];
        }
    }
}

double ConvField::sq_error_sum(const Volume& x_t, const BinaryMask& mask, int class_id, double t,
                               const Volume& u_t) const {
    ConvLayout L(*this);
    std::vector<double> emb, inj;
    conv_injection(L, params_, class_id, t, emb, inj);
    const double* p = params_.data();

    const Shape s = x_t.shape;
    std::vector<double> partial(size_t(s.d), 0.0);
#pragma omp parallel for schedule(static)
    for (int z = 0; z < s.d; ++z) {
        double acc = 0.0;
        for (int y = 0; y < s.h; ++y)
            for (int x = 0; x < s.w; ++x) {
                double patch[54];
                gather_patch(x_t, mask, z, y, x, patch);
                double v = p[L.b2()];
                for (int h = 0; h < L.H; ++h) {
                    double pre = inj[size_t(h)];
                    const double* w = p + L.w1() + h * 54;
                    for (int k = 0; k < 54; ++k) pre += w[k] * patch[k];
                    v += p[L.w2() + h] * std::tanh(pre);
                }
                double d = v - double(u_t.at(z, y, x));
                acc += d * d;
            }
        partial[size_t(z)] = acc;
    }
    double total = 0.0;
    for (double v : partial) total += v;
    return total;
}

OracleField::OracleField(Volume target) : target_(std::move(target)) {}

Volume OracleField::eval(const Volume& x_t, const BinaryMask&, int, double t) const {
    require_same_shape(x_t.shape, target_.shape);
    double denom = std::max(1.0 - t, 1e-9);
    const float inv = float(1.0 / denom);
    Volume out(x_t.shape);
    const int64_t n = out.shape.voxels();
#pragma omp parallel for schedule(static)
    for (int64_t i = 0; i < n; ++i)
        out.data[size_t(i)] = (target_.data[size_t(i)] - x_t.data[size_t(i)]) * inv;
    return out;
}

std::vector<double> OracleField::payload() const {
    return {target_.data.begin(), target_.data.end()};
}

namespace {

double batch_sq_error(const VelocityField& field, const PathSample& s, const Conditioning& c) {
    return field.sq_error_sum(s.x_t, c.mask, c.class_id, s.t, s.u_t);
}

void check_batch(const std::vector<PathSample>& batch, const std::vector<Conditioning>& cond) {
    if (batch.empty()) throw Error("empty-batch", "cfm loss needs at least one sample");
    if (batch.size() != cond.size())
        throw Error("shape-mismatch", "batch and conditioning lists differ in length");
    for (size_t i = 0; i < batch.size(); ++i) {
        require_same_shape(batch[i].x_t.shape, batch[0].x_t.shape);
        require_same_shape(batch[i].x_t.shape, cond[i].mask.shape);
    }
}

}  // namespace

double cfm_loss(const VelocityField& field, const std::vector<PathSample>& batch,
                const std::vector<Conditioning>& cond) {
    check_batch(batch, cond);
    const double scale = 1.0 / (double(batch.size()) * double(batch[0].x_t.shape.voxels()));
    double acc = 0.0;
    for (size_t i = 0; i < batch.size(); ++i) acc += batch_sq_error(field, batch[i], cond[i]);
    double loss = acc * scale;
    if (!std::isfinite(loss)) throw Error("non-finite-loss", "cfm loss is not finite");
    return loss;
}

std::vector<double> cfm_loss_gradient(const VelocityField& field,
                                      const std::vector<PathSample>& batch,
                                      const std::vector<Conditioning>& cond) {
    check_batch(batch, cond);
    std::vector<double> grad(size_t(field.param_count()), 0.0);
    const double scale = 1.0 / (double(batch.size()) * double(batch[0].x_t.shape.voxels()));
    for (size_t i = 0; i < batch.size(); ++i)
        field.accumulate_gradient(batch[i].x_t, cond[i].mask, cond[i].class_id, batch[i].t,
                                  batch[i].u_t, scale, grad);
    return grad;
}

double loss_gradient_check(VelocityField& field, const std::vector<PathSample>& batch,
                           const std::vector<Conditioning>& cond, double h) {
    if (!(h > 0)) throw Error("bad-step", "finite-difference step must be positive");
    std::vector<double> grad = cfm_loss_gradient(field, batch, cond);
    std::vector<double>& p = field.params();
    // The denominator is floored at 1e-4 (the loss is O(1) here): below that
    // scale a pure ratio measures the central-difference estimator's own
    // O(h^2) truncation, not the gradient.
    const double floor = 1e-4;
    double max_rel = 0.0;
    for (size_t i = 0; i < p.size(); ++i) {
        double keep = p[i];
        p[i] = keep + h;
        double lp = cfm_loss(field, batch, cond);
        p[i] = keep - h;
        double lm = cfm_loss(field, batch, cond);
        p[i] = keep;
        double fd = (lp - lm) / (2.0 * h);
        double denom = std::max({std::abs(grad[i]), std::abs(fd), floor});
        max_rel = std::max(max_rel, std::abs(grad[i] - fd) / denom);
    }
    return max_rel;
}

Volume euler_sample(const VelocityField& field, Volume x0, const BinaryMask& mask,
                    int class_id, EulerSchedule schedule) {
    if (schedule.steps < 1) throw Error("bad-schedule", "euler sampling needs N >= 1");
    const double dt = schedule.dt();
    Volume x = std::move(x0);
    const int64_t n = x.shape.voxels();
    for (int k = 0; k < schedule.steps; ++k) {
        double t = double(k) * dt;
        Volume v = field.eval(x, mask, class_id, t);
        bool finite = true;
#pragma omp parallel for schedule(static) reduction(&& : finite)
        for (int64_t i = 0; i < n; ++i) {
            x.data[size_t(i)] += v.data[size_t(i)] * float(dt);
            finite = finite && std::isfinite(x.data[size_t(i)]);
        }
        if (!finite) throw Error("non-finite-state", "euler state diverged at step " +
                                                          std::to_string(k));
    }
    return x;
}

void save_field(const VelocityField& field, const std::string& path) {
    nlohmann::json header;
    header["kind"] = field.kind();
    if (field.kind() == "mlp") {
        const auto& f = dynamic_cast<const MlpField&>(field);
        header["hidden"] = f.hidden();
        header["embed"] = f.embed();
        header["classes"] = f.n_classes();
    } else if (field.kind() == "conv") {
        const auto& f = dynamic_cast<const ConvField&>(field);
        header["hidden"] = f.hidden();
        header["embed"] = f.embed();
        header["classes"] = f.n_classes();
    } else if (field.kind() == "oracle") {
        const auto& f = dynamic_cast<const OracleField&>(field);
        header["shape"] = {f.target().shape.d, f.target().shape.h, f.target().shape.w};
    }

    std::vector<double> payload = field.payload();
    std::vector<float> raw(payload.begin(), payload.end());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("io-failure", "cannot open " + path);
    out << header.dump() << "\n";
    out.write(reinterpret_cast<const char*>(raw.data()),
              std::streamsize(raw.size() * sizeof(float)));
    if (!out) throw Error("io-failure", "short write to " + path);
}

std::unique_ptr<VelocityField> load_field(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("io-failure", "cannot open " + path);
    std::string line;
    if (!std::getline(in, line)) throw Error("bad-field-file", "missing header line");
    nlohmann::json header = nlohmann::json::parse(line, nullptr, false);
    if (header.is_discarded()) throw Error("bad-field-file", "header is not valid JSON");

    std::vector<float> raw;
    {
        char buf[4096];
        while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
            size_t got = size_t(in.gcount());
            size_t old = raw.size() * sizeof(float);
            raw.resize((old + got + sizeof(float) - 1) / sizeof(float));
            std::memcpy(reinterpret_cast<char*>(raw.data()) + old, buf, got);
            if (got < sizeof(buf)) break;
        }
    }

    std::string kind = header.value("kind", "");
    if (kind == "mlp" || kind == "conv") {
        int hidden = header.at("hidden").get<int>();
        int embed = header.at("embed").get<int>();
        int classes = header.at("classes").get<int>();
        std::unique_ptr<VelocityField> f;
        if (kind == "mlp")
            f = std::make_unique<MlpField>(hidden, embed, classes, 0);
        else
            f = std::make_unique<ConvField>(hidden, embed, classes, 0);
        if (int(raw.size()) != f->param_count())
            throw Error("bad-field-file", "payload length does not match the layer sizes");
        std::vector<double>& p = f->params();
        for (size_t i = 0; i < raw.size(); ++i) p[i] = raw[i];
        return f;
    }
    if (kind == "oracle") {
        auto dims = header.at("shape").get<std::vector<int>>();
        if (dims.size() != 3) throw Error("bad-field-file", "oracle shape must be 3D");
        Shape s{dims[0], dims[1], dims[2]};
        if (int64_t(raw.size()) != s.voxels())
            throw Error("bad-field-file", "oracle payload does not match its shape");
        Volume target(s);
        std::copy(raw.begin(), raw.end(), target.data.begin());
        return std::make_unique<OracleField>(std::move(target));
    }
    throw Error("bad-field-file", "unknown field kind: " + kind);
}

std::vector<ToyItem> make_toy_dataset(Shape shape, int per_class, uint64_t seed) {
    std::vector<ToyItem> data;
    Rng rng(seed, 0);
    const float bg = 0.15f;
    const float fg_level[2] = {0.85f, 0.25f};  // class 1 bright, class 2 faint
    for (int cls = 1; cls <= 2; ++cls) {
        for (int k = 0; k < per_class; ++k) {
            BinaryMask m(shape);
            double r = rng.uniform(3.0, 5.0);
            double cz = shape.d / 2.0 + rng.uniform(-3, 3);
            double cy = shape.h / 2.0 + rng.uniform(-3, 3);
            double cx = shape.w / 2.0 + rng.uniform(-3, 3);
            for (int z = 0; z < shape.d; ++z)
                for (int y = 0; y < shape.h; ++y)
                    for (int x = 0; x < shape.w; ++x) {
                        double dz = z - cz, dy = y - cy, dx = x - cx;
                        if (dz * dz + dy * dy + dx * dx < r * r) m.at(z, y, x) = 1;
                    }
            float fg = fg_level[cls - 1] + rng.uniformf(-0.05f, 0.05f);
            Volume x1(shape, bg);
            for (int64_t i = 0; i < shape.voxels(); ++i)
                if (m.data[size_t(i)]) x1.data[size_t(i)] = fg;
            data.push_back({std::move(x1), Conditioning{std::move(m), cls, false}});
        }
    }
    return data;
}

ToyStats measure_toy_stats(const std::vector<ToyItem>& data) {
    ToyStats st;
    double fg_sum[3] = {0, 0, 0}, fg_n[3] = {0, 0, 0};
    double bg_sum = 0, bg_n = 0;
    for (const auto& item : data) {
        int c = item.cond.class_id;
        for (size_t i = 0; i < item.x1.data.size(); ++i) {
            if (item.cond.mask.data[i]) {
                fg_sum[c] += item.x1.data[i];
                fg_n[c] += 1;
            } else {
                bg_sum += item.x1.data[i];
                bg_n += 1;
            }
        }
    }
    for (int c = 1; c <= 2; ++c)
        if (fg_n[c] > 0) st.fg_mean[c] = fg_sum[c] / fg_n[c];
    if (bg_n > 0) st.bg_mean = bg_sum / bg_n;
    return st;
}

TrainResult train_toy(VelocityField& field, const std::vector<ToyItem>& data, int steps,
                      double lr, int batch_size, Rng& rng) {
    if (data.empty()) throw Error("empty-batch", "toy training needs a non-empty dataset");
    TrainResult result;
    result.trace.reserve(size_t(steps));

    std::vector<double>& p = field.params();
    for (int step = 0; step < steps; ++step) {
        std::vector<PathSample> batch;
        std::vector<Conditioning> cond;
        for (int b = 0; b < batch_size; ++b) {
            const ToyItem& item = data[size_t(rng.uniform_int(0, int64_t(data.size()) - 1))];
            float t = float(rng.uniform(0.0, 1.0 - kTimeEps));
            Volume x0(item.x1.shape);
            for (auto& v : x0.data) v = float(rng.normal());
            batch.push_back(make_path_sample(x0, item.x1, t));
            cond.push_back(item.cond);
        }
        double loss = cfm_loss(field, batch, cond);
        result.trace.push_back(loss);
        if (loss > 1e6) {
            result.diverged = true;
            return result;
        }
        if (lr == 0.0) continue;
        std::vector<double> grad = cfm_loss_gradient(field, batch, cond);
        for (size_t i = 0; i < p.size(); ++i) p[i] -= lr * grad[i];
    }
    return result;
}

void write_loss_trace_csv(const std::string& path, const std::vector<double>& trace) {
    std::ofstream out(path);
    if (!out) throw Error("io-failure", "cannot open " + path);
    out << "step,loss\n";
    for (size_t i = 0; i < trace.size(); ++i) out << i << "," << trace[i] << "\n";
}

std::vector<FlowSample> generate_dflow(const VelocityField& field,
                                       const std::vector<BinaryMask>& masks,
                                       const std::vector<int>& classes, int count,
                                       EulerSchedule schedule, uint64_t seed) {
    if (count > 0 && (masks.empty() || classes.empty()))
        throw Error("empty-batch", "dflow generation needs masks and classes");
    std::vector<FlowSample> out;
    out.reserve(size_t(count));
    for (int i = 0; i < count; ++i) {
        Rng rng(seed, uint64_t(i));
        const BinaryMask& mask = masks[size_t(rng.uniform_int(0, int64_t(masks.size()) - 1))];
        int cls = classes[size_t(rng.uniform_int(0, int64_t(classes.size()) - 1))];
        Volume x0(mask.shape);
        for (auto& v : x0.data) v = float(rng.normal());
        FlowSample s;
        s.image = euler_sample(field, std::move(x0), mask, cls, schedule);
        s.label = mask;
        s.class_id = cls;
        s.synthetic_origin = true;
        out.push_back(std::move(s));
    }
    return out;
}

}  // namespace vforge::flow
