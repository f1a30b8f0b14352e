#pragma once

#include "fullflow/bench.hpp"
#include "fullflow/core.hpp"
#include "fullflow/cost_volume.hpp"
#include "fullflow/eval.hpp"
#include "fullflow/flow_io.hpp"
#include "fullflow/grid.hpp"
#include "fullflow/image_io.hpp"
#include "fullflow/minconv.hpp"
#include "fullflow/pipeline.hpp"
#include "fullflow/postprocess.hpp"
#include "fullflow/synthetic.hpp"
#include "fullflow/trws.hpp"
