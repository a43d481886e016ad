#pragma once

#include "lctvnumra/error.hpp"
#include "lctvnumra/lct.hpp"
#include "lctvnumra/lattice.hpp"
#include "lctvnumra/mask.hpp"
#include "lctvnumra/cascade.hpp"
#include "lctvnumra/pipeline.hpp"
#include "lctvnumra/io.hpp"
