// SPDX-License-Identifier: Apache-2.0

use std::process::ExitCode;

use clap::Parser;
use fedlab::cli::{main_with, Cli};

fn main() -> ExitCode {
    main_with(Cli::parse())
}
