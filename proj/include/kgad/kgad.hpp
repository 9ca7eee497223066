#pragma once

#include "kgad/anomaly.hpp"
#include "kgad/checkpoint.hpp"
#include "kgad/common.hpp"
#include "kgad/datagen.hpp"
#include "kgad/graph.hpp"
#include "kgad/graph_io.hpp"
#include "kgad/ingest.hpp"
#include "kgad/io.hpp"
#include "kgad/linkpred.hpp"
#include "kgad/model.hpp"
#include "kgad/score_table.hpp"
#include "kgad/train.hpp"
