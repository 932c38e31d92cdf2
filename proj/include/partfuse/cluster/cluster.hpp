#pragma once

#include <vector>

#include "partfuse/cluster/mean_shift.hpp"
#include "partfuse/data/pls_io.hpp"
#include "partfuse/model/network.hpp"

namespace partfuse::cluster {

/// Row-wise argmax as 1-based labels; ties go to the lower class.
std::vector<int> argmax_labels(const Matrix& probs);

/// Groups one level: points are partitioned by argmax label, each partition's
/// region-pushed points are mean-shifted, and instance ids are numbered
/// consecutively by (label, mode order). An instance's confidence is the mean
/// of P[:, label] over its points.
data::PredictedLevel cluster_level(const Matrix& points, const model::LevelOutputs& outputs,
                                   const ClusterParams& params);

/// Clusters every level independently.
data::PredictedShape cluster_instances(const Matrix& points, const model::ForwardOutputs& outputs,
                                       const ClusterParams& params);

}  // namespace partfuse::cluster
