#pragma once

#include "tsnescope/dataset.hpp"
#include "tsnescope/error.hpp"
#include "tsnescope/interpret.hpp"
#include "tsnescope/matrix.hpp"
#include "tsnescope/quality.hpp"
#include "tsnescope/search.hpp"
#include "tsnescope/stats.hpp"
#include "tsnescope/tsne.hpp"
