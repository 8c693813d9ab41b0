#pragma once

#include "gbr/ba/align.hpp"
#include "gbr/ba/bundle_adjust.hpp"
#include "gbr/ba/focal.hpp"
#include "gbr/ba/matching.hpp"
#include "gbr/ba/neural_ba.hpp"
#include "gbr/ba/refine.hpp"
#include "gbr/ba/synthetic_tracks.hpp"
#include "gbr/ba/types.hpp"
#include "gbr/core/camera.hpp"
#include "gbr/core/error.hpp"
#include "gbr/core/gaussian.hpp"
#include "gbr/core/geometry_types.hpp"
#include "gbr/core/maps.hpp"
#include "gbr/core/raster.hpp"
#include "gbr/core/rig.hpp"
#include "gbr/core/summation.hpp"
#include "gbr/depth/aggregate.hpp"
#include "gbr/depth/projection.hpp"
#include "gbr/depth/refine.hpp"
#include "gbr/depth/scale_correct.hpp"
#include "gbr/eval/metrics.hpp"
#include "gbr/geometry/dbscan.hpp"
#include "gbr/geometry/kdtree.hpp"
#include "gbr/geometry/nn_grid.hpp"
#include "gbr/geometry/polygon.hpp"
#include "gbr/geometry/umeyama.hpp"
#include "gbr/io/cameras.hpp"
#include "gbr/io/depth_provider.hpp"
#include "gbr/io/ply.hpp"
#include "gbr/io/png.hpp"
#include "gbr/io/raw.hpp"
#include "gbr/io/scene.hpp"
#include "gbr/io/synthetic.hpp"
#include "gbr/loss/losses.hpp"
#include "gbr/loss/pseudo_view.hpp"
#include "gbr/loss/ssim.hpp"
#include "gbr/mesh/tsdf.hpp"
#include "gbr/pipeline/config.hpp"
#include "gbr/pipeline/manifest.hpp"
#include "gbr/pipeline/pipeline.hpp"
#include "gbr/pipeline/stages.hpp"
#include "gbr/render/splat.hpp"
