#include "vforge/metrics.hpp"

#include "vforge/ops.hpp"

namespace vforge::metrics {

namespace {

int64_t intersection_count(const BinaryMask& a, const BinaryMask& b) {
    int64_t n = 0;
    for (size_t i = 0; i < a.data.size(); ++i) n += a.data[i] & b.data[i];
    return n;
}

}  // namespace

double dice(const BinaryMask& pred, const BinaryMask& gt) {
    require_same_shape(pred.shape, gt.shape);
    int64_t np = count_foreground(pred), ng = count_foreground(gt);
    if (np + ng == 0) return 1.0;
    return 2.0 * double(intersection_count(pred, gt)) / double(np + ng);
}

MetricReport cldice(const BinaryMask& pred, const BinaryMask& gt) {
    require_same_shape(pred.shape, gt.shape);
    MetricReport r;
    r.n_pred = count_foreground(pred);
    r.n_gt = count_foreground(gt);
    r.n_inter = intersection_count(pred, gt);
    r.dice = (r.n_pred + r.n_gt) == 0 ? 1.0
                                      : 2.0 * double(r.n_inter) / double(r.n_pred + r.n_gt);

    BinaryMask sp = ops::skeletonize(pred);
    BinaryMask sg = ops::skeletonize(gt);
    r.skel_pred = count_foreground(sp);
    r.skel_gt = count_foreground(sg);

    if (r.skel_pred == 0 && r.skel_gt == 0) {
        r.tprec = r.tsens = r.cldice = 1.0;
        return r;
    }
    if (r.skel_pred == 0 || r.skel_gt == 0) {
        r.tprec = r.tsens = r.cldice = 0.0;
        return r;
    }
    r.tprec = double(intersection_count(sp, gt)) / double(r.skel_pred);
    r.tsens = double(intersection_count(sg, pred)) / double(r.skel_gt);
    r.cldice = (r.tprec + r.tsens) > 0 ? 2.0 * r.tprec * r.tsens / (r.tprec + r.tsens) : 0.0;
    return r;
}

MetricReport aggregate(const std::vector<MetricReport>& reports) {
    MetricReport out;
    if (reports.empty()) return out;
    for (const auto& r : reports) {
        out.dice += r.dice;
        out.cldice += r.cldice;
        out.tprec += r.tprec;
        out.tsens += r.tsens;
        out.n_pred += r.n_pred;
        out.n_gt += r.n_gt;
        out.n_inter += r.n_inter;
        out.skel_pred += r.skel_pred;
        out.skel_gt += r.skel_gt;
    }
    double n = double(reports.size());
    out.dice /= n;
    out.cldice /= n;
    out.tprec /= n;
    out.tsens /= n;
    return out;
}

}  // namespace vforge::metrics
