#pragma once

#include "gentle/basis.hpp"
#include "gentle/common.hpp"
#include "gentle/config.hpp"
#include "gentle/echo_record.hpp"
#include "gentle/engine.hpp"
#include "gentle/freefermion.hpp"
#include "gentle/lattice.hpp"
#include "gentle/noise.hpp"
#include "gentle/optim.hpp"
#include "gentle/pipeline.hpp"
#include "gentle/reconstruct.hpp"
#include "gentle/sigproc.hpp"
#include "gentle/thermal.hpp"
#include "gentle/trotter.hpp"
