// SPDX-License-Identifier: MIT OR Apache-2.0

fn main() {
    std::process::exit(fdcov::cli::run(std::env::args_os()));
}
