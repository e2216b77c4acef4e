// Dice and topology-aware centerline Dice for prediction/ground-truth pairs.

#ifndef VFORGE_METRICS_HPP
#define VFORGE_METRICS_HPP

#include <cstdint>
#include <vector>

#include "vforge/volume.hpp"

namespace vforge::metrics {

struct MetricReport {
    double dice = 0, cldice = 0, tprec = 0, tsens = 0;
    int64_t n_pred = 0, n_gt = 0, n_inter = 0;
    int64_t skel_pred = 0, skel_gt = 0;
};

// 2|P n L| / (|P| + |L|); both empty -> 1 by convention.
double dice(const BinaryMask& pred, const BinaryMask& gt);

// tprec = |skel(P) n L| / |skel(P)|, tsens = |skel(L) n P| / |skel(L)|,
// cldice their harmonic mean. Both skeletons empty -> 1; exactly one -> 0.
MetricReport cldice(const BinaryMask& pred, const BinaryMask& gt);

// Macro average over pairs.
MetricReport aggregate(const std::vector<MetricReport>& reports);

}  // namespace vforge::metrics

#endif
