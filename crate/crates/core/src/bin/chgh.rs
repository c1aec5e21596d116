use std::process::ExitCode;

fn main() -> ExitCode {
    let args: Vec<std::ffi::OsString> = std::env::args_os().collect();
    let verbose = args.iter().any(|a| a == "-v" || a == "--verbose");
    env_logger::Builder::new()
        .filter_level(if verbose { log::LevelFilter::Info } else { log::LevelFilter::Warn })
        .format_timestamp(None)
        .init();
    ExitCode::from(chgh::cli::dispatch(args) as u8)
}
