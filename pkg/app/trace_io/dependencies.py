from fastapi import File, HTTPException, UploadFile, status

from app.config import settings
from app.trace_io.service import loads_trial
from app.traces.models import Trial


def uploaded_trial(file: UploadFile = File(...)) -> Trial:
    """Parse an uploaded trace file, enforcing the upload size limit."""
    content = file.file.read()
    max_bytes = settings.max_upload_size_mb * 1024 * 1024
    if len(content) > max_bytes:
        raise HTTPException(
            status_code=status.HTTP_400_BAD_REQUEST,
            detail=f"Arquivo excede o limite de {settings.max_upload_size_mb}MB.",
        )
    try:
        text = content.decode("utf-8")
    except UnicodeDecodeError:
        raise HTTPException(status_code=400, detail="Arquivo de traço deve estar em UTF-8")
    try:
        return loads_trial(text)
    except ValueError as e:
        raise HTTPException(status_code=400, detail=str(e))
