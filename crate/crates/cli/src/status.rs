//! Progress lines on stderr. Color only when stderr is a terminal and
//! `NO_COLOR` is unset.

use std::io::IsTerminal;
use std::path::Path;

fn colored() -> bool {
    std::env::var_os("NO_COLOR").is_none() && std::io::stderr().is_terminal()
}

pub fn wrote(path: &Path, hash: &str) {
    let short = &hash[..12.min(hash.len())];
    if colored() {
        eprintln!("\x1b[32mwrote\x1b[0m {} ({short})", path.display());
    } else {
        eprintln!("wrote {} ({short})", path.display());
    }
}

pub fn note(message: &str) {
    if colored() {
        eprintln!("\x1b[36mnote\x1b[0m {message}");
    } else {
        eprintln!("note {message}");
    }
}
