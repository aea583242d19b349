#pragma once

#include "vissoc/chains.hpp"
#include "vissoc/clustering.hpp"
#include "vissoc/core.hpp"
#include "vissoc/data_model.hpp"
#include "vissoc/experiments.hpp"
#include "vissoc/lexicon.hpp"
#include "vissoc/sim.hpp"
#include "vissoc/sim_config.hpp"
#include "vissoc/social_graph.hpp"
#include "vissoc/stats.hpp"
#include "vissoc/style_space.hpp"
#include "vissoc/style_vector.hpp"
#include "vissoc/themes.hpp"
