/// Display name for a shared-task language code; unknown codes are returned
/// unchanged.
pub fn language_name(code: &str) -> &str {
    match code {
        "arp" => "Arapaho",
        "ddo" => "Tsez",
        "git" => "Gitksan",
        "lez" => "Lezgi",
        "ntu" => "Natugu",
        "nyb" => "Nyangbo",
        "usp" => "Uspanteko",
        other => other,
    }
}
