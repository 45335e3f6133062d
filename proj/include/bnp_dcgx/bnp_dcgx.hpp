#pragma once

#include "error.hpp"
#include "random.hpp"
#include "model.hpp"
#include "stability.hpp"
#include "distributions.hpp"
#include "likelihood.hpp"
#include "sampler.hpp"
#include "tempering.hpp"
#include "predict.hpp"
#include "simulate.hpp"
#include "evaluate.hpp"
#include "io.hpp"
#include "commands.hpp"
