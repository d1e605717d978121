#pragma once

#include "gdraw/autodiff.hpp"
#include "gdraw/error.hpp"
#include "gdraw/generate.hpp"
#include "gdraw/graph.hpp"
#include "gdraw/io.hpp"
#include "gdraw/layout.hpp"
#include "gdraw/metrics.hpp"
#include "gdraw/model.hpp"
#include "gdraw/pipeline.hpp"
#include "gdraw/procrustes.hpp"
#include "gdraw/train.hpp"
