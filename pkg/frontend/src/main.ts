import { ReviewApi } from './api.js';
import { ReviewApp } from './app.js';

const app = new ReviewApp(new ReviewApi(''));
app.start().catch((err) => {
  const notice = document.getElementById('notice');
  if (notice) {
    notice.textContent = `failed to reach the review service: ${err}`;
    notice.classList.add('visible');
  }
});
