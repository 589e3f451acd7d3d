#pragma once

#include "pinchflow/error.hpp"
#include "pinchflow/geometry.hpp"
#include "pinchflow/reaction.hpp"
#include "pinchflow/parallel.hpp"
#include "pinchflow/sampling.hpp"
#include "pinchflow/verify.hpp"
#include "pinchflow/csv.hpp"
#include "pinchflow/exact_flows.hpp"
#include "pinchflow/grid_flow.hpp"
