#pragma once

#include "mebn/dataset.hpp"
#include "mebn/errors.hpp"
#include "mebn/experiment.hpp"
#include "mebn/graph.hpp"
#include "mebn/infer.hpp"
#include "mebn/io.hpp"
#include "mebn/lme.hpp"
#include "mebn/metrics.hpp"
#include "mebn/model.hpp"
#include "mebn/optim.hpp"
#include "mebn/random.hpp"
#include "mebn/score.hpp"
#include "mebn/search.hpp"
#include "mebn/simgen.hpp"
