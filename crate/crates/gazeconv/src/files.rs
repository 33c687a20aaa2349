use std::path::Path;

use gazeconv_core::eval::ScanpathImage;
use gazeconv_core::model_file::{Model, Task};

use crate::error::{in_file, CliError, Result};

pub fn save_model(path: &Path, model: &Model) -> Result<()> {
    std::fs::write(path, model.encode()).map_err(|e| CliError::io(path, e))
}

pub fn load_model(path: &Path) -> Result<Model> {
    let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
    Model::decode(&bytes).map_err(|e| in_file(path, e))
}

/// Loads a model and rejects it unless it was trained for `task`.
pub fn load_model_for(path: &Path, task: Task) -> Result<Model> {
    let model = load_model(path)?;
    if model.task() != task {
        return Err(CliError::Usage(format!(
            "{}: model was trained for '{}', not '{}'",
            path.display(),
            model.task().name(),
            task.name()
        )));
    }
    Ok(model)
}

pub fn save_png(path: &Path, img: &ScanpathImage) -> Result<()> {
    let buf = image::RgbImage::from_raw(img.width as u32, img.height as u32, img.raw_rgb())
        .expect("pixel buffer matches the image size");
    buf.save_with_format(path, image::ImageFormat::Png)
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}
